use std::ffi::{c_void, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use cao_swarm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; cao_last_error_length() + 1];
    unsafe {
        cao_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

const SCENARIO: &str = "testbed = \"synthetic-quadratic\"\nN = 3\niterations = 40\nseed = 4\n";

fn new_run(text: &str) -> *mut CaoRun {
    let text = CString::new(text).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { cao_run_new(text.as_ptr(), &mut run) }, CaoStatus::Ok, "{}", last_error());
    run
}

#[test]
fn run_handle_executes_and_reports() {
    let run = new_run(SCENARIO);
    unsafe {
        let mut cost = 0.0;
        assert_eq!(cao_run_cost(run, 0, &mut cost), CaoStatus::NotExecuted);
        assert_eq!(cao_run_execute(run), CaoStatus::Ok);
        let mut n = 0;
        assert_eq!(cao_run_iterations(run, &mut n), CaoStatus::Ok);
        assert_eq!(n, 40);
        assert_eq!(cao_run_cost(run, 39, &mut cost), CaoStatus::Ok);
        assert!(cost.is_finite());
        assert_eq!(cao_run_cost(run, 40, &mut cost), CaoStatus::OutOfRange);

        let mut small = [0.0; 1];
        let mut written = 0;
        assert_eq!(cao_run_final_position(run, 0, small.as_mut_ptr(), 1, &mut written), CaoStatus::BufferTooSmall);
        assert_eq!(written, 3);
        let mut x = [0.0; 3];
        assert_eq!(cao_run_final_position(run, 2, x.as_mut_ptr(), 3, &mut written), CaoStatus::Ok);
        assert_eq!(cao_run_final_position(run, 3, x.as_mut_ptr(), 3, &mut written), CaoStatus::OutOfRange);
        cao_run_free(run);
    }
}

#[test]
fn run_results_match_the_library() {
    let run = new_run(SCENARIO);
    let cfg = cao_swarm::harness::ScenarioConfig::from_toml_str(SCENARIO).unwrap();
    let direct = cao_swarm::harness::run_scenario(&cfg).unwrap();
    unsafe {
        assert_eq!(cao_run_execute(run), CaoStatus::Ok);
        for (k, want) in direct.costs().iter().enumerate() {
            let mut got = 0.0;
            cao_run_cost(run, k, &mut got);
            assert_eq!(got.to_bits(), want.to_bits());
        }
        cao_run_free(run);
    }
}

#[test]
fn seed_change_discards_results() {
    let run = new_run(SCENARIO);
    unsafe {
        assert_eq!(cao_run_execute(run), CaoStatus::Ok);
        assert_eq!(cao_run_set_seed(run, 9), CaoStatus::Ok);
        let mut n = 0;
        assert_eq!(cao_run_iterations(run, &mut n), CaoStatus::NotExecuted);
        cao_run_free(run);
    }
}

#[test]
fn artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let run = new_run(SCENARIO);
    let path = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(cao_run_write_artifacts(run, path.as_ptr()), CaoStatus::NotExecuted);
        cao_run_execute(run);
        assert_eq!(cao_run_write_artifacts(run, path.as_ptr()), CaoStatus::Ok);
        cao_run_free(run);
    }
    assert!(dir.path().join("out/metrics.csv").exists());
}

#[test]
fn bad_scenarios_are_config_errors() {
    let text = CString::new("testbed = \"voronoi\"\nN = 2\niterations = 3\nbogus = 1\n").unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { cao_run_new(text.as_ptr(), &mut run) }, CaoStatus::Config);
    assert!(run.is_null());
    assert!(last_error().contains("bogus"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(cao_run_new(ptr::null(), &mut run), CaoStatus::NullPointer);
        assert_eq!(cao_run_execute(ptr::null_mut()), CaoStatus::NullPointer);
        assert_eq!(cao_agent_join(ptr::null_mut(), 0.0), CaoStatus::NullPointer);
        cao_run_free(ptr::null_mut());
        cao_agent_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let bytes = [0xffu8, 0xfe, 0];
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { cao_run_new(bytes.as_ptr().cast(), &mut run) }, CaoStatus::InvalidUtf8);
}

unsafe extern "C" fn inside_box(x: *const f64, dim: usize, _: *mut c_void) -> bool {
    std::slice::from_raw_parts(x, dim).iter().all(|v| (-2.0..=2.0).contains(v))
}

/// A host loop over one agent on f(x) = |x - c|^2, discrepancy computed by
/// the host exactly as the coordinator would.
#[test]
fn agent_handle_descends_a_host_owned_cost() {
    let c = [0.3, -0.4];
    let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let config = CString::new(
        "window = 20\nperturbations = 60\nperturbation_scale = 1.0\nwarmup = 3\nrcond = 1e-10\n\
         [regressor]\nmax_order = 2\nsize = 6\n[step]\nkind = \"decaying\"\nbase = 0.1\np = 0.6\n",
    )
    .unwrap();
    let mut agent = ptr::null_mut();
    let x0 = [1.5, 1.5];
    let mut x = x0.to_vec();
    unsafe {
        let status = cao_agent_new(0, x0.as_ptr(), 2, config.as_ptr(), 3, &mut agent);
        assert_eq!(status, CaoStatus::Ok, "{}", last_error());
        let mut prev = x0.to_vec();
        assert_eq!(cao_agent_join(agent, f(&x)), CaoStatus::Ok);
        for k in 0..300 {
            let delta = if k == 0 { 0.0 } else { f(&x) - f(&prev) };
            prev = x.clone();
            let status = cao_agent_iterate(agent, delta, k, Some(inside_box), ptr::null_mut(), x.as_mut_ptr(), 2);
            assert_eq!(status, CaoStatus::Ok, "{}", last_error());
        }
        let mut got = [0.0; 2];
        let mut written = 0;
        assert_eq!(cao_agent_decision(agent, got.as_mut_ptr(), 2, &mut written), CaoStatus::Ok);
        assert_eq!(got.to_vec(), x);
        cao_agent_free(agent);
    }
    assert!(f(&x0) > 1.0);
    assert!(f(&x) < 0.05, "final cost {}", f(&x));
}

#[test]
fn agent_rejects_non_finite_discrepancy() {
    let mut agent = ptr::null_mut();
    let x0 = [0.0, 0.0];
    unsafe {
        assert_eq!(cao_agent_new(1, x0.as_ptr(), 2, ptr::null(), 1, &mut agent), CaoStatus::Ok);
        let mut next = [0.0; 2];
        assert_eq!(
            cao_agent_iterate(agent, 0.0, 0, None, ptr::null_mut(), next.as_mut_ptr(), 2),
            CaoStatus::InvariantBreach,
            "iterating before joining is a protocol breach"
        );
        cao_agent_join(agent, 0.0);
        assert_eq!(
            cao_agent_iterate(agent, f64::NAN, 0, None, ptr::null_mut(), next.as_mut_ptr(), 2),
            CaoStatus::InvariantBreach
        );
        assert_eq!(cao_agent_set_active(agent, false), CaoStatus::Ok);
        cao_agent_free(agent);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cao_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/cao_swarm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["cao_agent_new", "cao_agent_iterate", "cao_run_new", "cao_run_execute", "cao_last_error_message"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(root.join("include"))
        .arg(root.join("tests/c_header_smoke.c"))
        .status()
    else {
        eprintln!("no C compiler; header syntax not checked");
        return;
    };
    assert!(status.success());
}
