use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use droo_ffi::*;

fn last_error() -> String {
    let p = droo_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn solve_matches_core() {
    let params = droo_params_new(3);
    assert!(!params.is_null());
    assert_eq!(unsafe { droo_params_n(params) }, 3);
    let h = [4e-6, 1.1e-5, 2.5e-6];
    let x = [1u8, 0, 1];
    let (mut a, mut q) = (0.0, 0.0);
    let mut tau = [0.0; 3];
    let st = unsafe { droo_solve_p2(params, h.as_ptr(), x.as_ptr(), 3, &mut a, tau.as_mut_ptr(), &mut q) };
    assert_eq!(st, DrooStatus::Ok);

    let p = droo_core::SystemParams::reference(3);
    let frame = droo_core::ChannelFrame::new(1, h.to_vec()).unwrap();
    let act = droo_core::OffloadAction::from_u8(&x).unwrap();
    let r = droo_core::solve_p2(&frame, &act, &p, &droo_core::SolverConfig::default()).unwrap();
    assert_eq!((a, q), (r.a, r.q));
    assert_eq!(tau.to_vec(), r.tau);
    assert_eq!(tau[1], 0.0);
    unsafe { droo_params_free(params) };
}

#[test]
fn errors_become_status_codes() {
    let params = droo_params_new(2);
    let h = [1e-6, 2e-6];
    let bad_x = [1u8, 2];
    let (mut a, mut q) = (0.0, 0.0);
    let mut tau = [0.0; 2];
    let st = unsafe { droo_solve_p2(params, h.as_ptr(), bad_x.as_ptr(), 2, &mut a, tau.as_mut_ptr(), &mut q) };
    assert_eq!(st, DrooStatus::InvalidArgument);
    assert!(last_error().contains("0 or 1"), "{}", last_error());

    let st = unsafe { droo_solve_p2(ptr::null(), h.as_ptr(), bad_x.as_ptr(), 2, &mut a, tau.as_mut_ptr(), &mut q) };
    assert_eq!(st, DrooStatus::NullPointer);

    let w = [1.0, 1.0, 1.0];
    assert_eq!(unsafe { droo_params_set_weights(params, w.as_ptr(), 3) }, DrooStatus::LengthMismatch);
    let w = [1.0, -1.0];
    assert_eq!(unsafe { droo_params_set_weights(params, w.as_ptr(), 2) }, DrooStatus::InvalidArgument);

    let big = droo_params_new(13);
    let h13 = [1e-6; 13];
    let mut x13 = [0u8; 13];
    assert_eq!(unsafe { droo_exhaustive(big, h13.as_ptr(), 13, x13.as_mut_ptr(), &mut q) }, DrooStatus::TooLarge);
    assert!(droo_params_new(0).is_null());
    unsafe {
        droo_params_free(big);
        droo_params_free(params);
        droo_params_free(ptr::null_mut());
    }
}

#[test]
fn quantize_worked_example() {
    let xhat = [0.2, 0.4, 0.7, 0.9];
    let mut out = [9u8; 16];
    let st = unsafe { droo_quantize(DrooQuantizer::OrderPreserving, xhat.as_ptr(), 4, 4, out.as_mut_ptr()) };
    assert_eq!(st, DrooStatus::Ok);
    assert_eq!(out, [0, 0, 1, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 1]);
    let st = unsafe { droo_quantize(DrooQuantizer::Knn, xhat.as_ptr(), 4, 4, out.as_mut_ptr()) };
    assert_eq!(st, DrooStatus::Ok);
    assert_eq!(out, [0, 0, 1, 1, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1, 0, 1]);
}

#[test]
fn agent_steps_and_baselines_agree_for_one_device() {
    let params = droo_params_new(1);
    let opts = DrooAgentOptions {
        quantizer: DrooQuantizer::OrderPreserving,
        k_mode: DrooKMode::Fixed,
        k: 2,
        delta: 32,
        threads: 1,
    };
    let mut agent = ptr::null_mut();
    assert_eq!(unsafe { droo_agent_new(params, &opts, 7, &mut agent) }, DrooStatus::Ok);
    for t in 1..=20u64 {
        let h = [1e-6 * t as f64];
        let mut out = DrooFrameOutput::default();
        let mut x = [0u8];
        let st = unsafe { droo_agent_step(agent, t, h.as_ptr(), 1, &mut out, x.as_mut_ptr(), ptr::null_mut()) };
        assert_eq!(st, DrooStatus::Ok);
        let (mut xe, mut qe) = ([0u8], 0.0);
        assert_eq!(unsafe { droo_exhaustive(params, h.as_ptr(), 1, xe.as_mut_ptr(), &mut qe) }, DrooStatus::Ok);
        // Two candidates cover the whole action space.
        assert_eq!(out.q, qe);
        assert!(out.k_star >= 1 && out.k_star <= out.k_used);
    }
    let bad = DrooAgentOptions { k: 0, ..opts };
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { droo_agent_new(params, &bad, 7, &mut other) }, DrooStatus::InvalidArgument);
    assert!(other.is_null());
    unsafe {
        droo_agent_free(agent);
        droo_params_free(params);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(droo_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("droo.h").exists());
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"droo.h\"\n\
         int main(void) {\n\
           DrooParams *p = droo_params_new(2);\n\
           double h[2] = {1e-6, 2e-6}; uint8_t x[2]; double q;\n\
           DrooStatus s = droo_exhaustive(p, h, 2, x, &q);\n\
           droo_params_free(p);\n\
           return s == DROO_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("droo-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
