use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::ptr;

use flexlink_ffi::*;

fn reference_path() -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/paper_scenario.toml");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        flexlink_last_error_message(buf.as_mut_ptr(), buf.len());
        std::ffi::CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn roots_through_the_abi() {
    let mut roots = [0.0; 3];
    let status = unsafe { flexlink_characteristic_roots(3, roots.as_mut_ptr()) };
    assert_eq!(status, FlexlinkStatus::Ok);
    assert!((roots[0] - 1.8751).abs() < 5e-5);
    assert!((roots[1] - 4.6941).abs() < 5e-5);
    assert!((roots[2] - 7.8548).abs() < 5e-5);
}

#[test]
fn null_arguments_are_reported() {
    assert_eq!(unsafe { flexlink_characteristic_roots(2, ptr::null_mut()) }, FlexlinkStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { flexlink_scenario_from_str(ptr::null(), &mut handle) },
        FlexlinkStatus::NullPointer
    );
    let mut summary = std::mem::MaybeUninit::<FlexlinkSummary>::uninit();
    assert_eq!(unsafe { flexlink_run(ptr::null(), summary.as_mut_ptr()) }, FlexlinkStatus::NullPointer);
    unsafe { flexlink_scenario_free(ptr::null_mut()) };
}

#[test]
fn parse_errors_carry_a_message() {
    let text = CString::new("[beam]\nlength = \"long\"\n").unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { flexlink_scenario_from_str(text.as_ptr(), &mut handle) };
    assert_eq!(status, FlexlinkStatus::Parse);
    assert!(handle.is_null());
    let message = last_error();
    assert!(message.contains("line"), "{message}");
    let needed = unsafe { flexlink_last_error_message(ptr::null_mut(), 0) };
    assert_eq!(needed, message.len() + 1);
}

#[test]
fn indefinite_gains_are_a_config_error() {
    let text = std::fs::read_to_string(reference_path().to_str().unwrap())
        .unwrap()
        .replace("kv = [30.0, 1.0, 0.5]", "kv = [30.0, 1.0, -0.5]");
    let text = CString::new(text).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { flexlink_scenario_from_str(text.as_ptr(), &mut handle) }, FlexlinkStatus::Config);
    assert!(last_error().contains("Kv"));
}

#[test]
fn short_run_and_constants() {
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(flexlink_scenario_from_file(reference_path().as_ptr(), &mut handle), FlexlinkStatus::Ok);
        assert_eq!(flexlink_scenario_set_duration(handle, -1.0), FlexlinkStatus::Config);
        assert_eq!(flexlink_scenario_set_duration(handle, 0.05), FlexlinkStatus::Ok);

        let mut written = 0usize;
        let mut modes = [std::mem::zeroed::<FlexlinkModeConstants>(); 2];
        assert_eq!(
            flexlink_modal_constants(handle, modes.as_mut_ptr(), 1, &mut written),
            FlexlinkStatus::BufferTooSmall
        );
        assert_eq!(written, 2);
        assert_eq!(
            flexlink_modal_constants(handle, modes.as_mut_ptr(), 2, &mut written),
            FlexlinkStatus::Ok
        );
        assert_eq!(modes[1].mode_index, 2);
        assert!((modes[0].a0 - 1.0).abs() < 1e-9);
        assert!((modes[0].natural_frequency - 44.757).abs() < 1e-2);

        let mut summary = std::mem::zeroed::<FlexlinkSummary>();
        assert_eq!(flexlink_run(handle, &mut summary), FlexlinkStatus::Ok);
        assert!(summary.contact_time.is_nan());
        assert!(summary.lyapunov_initial > 0.0);
        assert!(summary.lyapunov_max_increase <= 0.0);

        let dir = tempfile::tempdir().unwrap();
        let dir_c = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(flexlink_run_to_dir(handle, dir_c.as_ptr(), false), FlexlinkStatus::Ok);
        assert!(dir.path().join("log.csv").exists());
        assert!(dir.path().join("summary.csv").exists());
        flexlink_scenario_free(handle);
    }
}

#[test]
fn missing_file_status() {
    let path = CString::new("/nonexistent/flexlink.toml").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { flexlink_scenario_from_file(path.as_ptr(), &mut handle) },
        FlexlinkStatus::MissingFile
    );
}
