use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use specbench_ffi::*;

const MANIFEST: &str = concat!(
    r#"{"type":"analyte","key2d":"QNAYBMKLOCPYGJ","smiles":"CC(N)C(=O)O","registry_id":5950,"name":"alanine"}"#,
    "\n",
    r#"{"type":"analyte","key2d":"DHMQDGOQFOQNFH","smiles":"NCC(=O)O","registry_id":750,"name":"glycine"}"#,
    "\n",
    r#"{"type":"spectrum","id":"ala1","precursor_mz":90.055,"polarity":"positive","peaks":[[44.05,100.0],[72.04,20.0]],"analyte_key":"QNAYBMKLOCPYGJ"}"#,
    "\n",
    r#"{"type":"spectrum","id":"gly1","precursor_mz":76.039,"polarity":"positive","peaks":[[30.03,100.0],[48.0,10.0]],"analyte_key":"DHMQDGOQFOQNFH"}"#,
    "\n",
);

const MGF: &str = "BEGIN IONS\nTITLE=q1\nPEPMASS=90.0551\n44.05 90\n72.04 25\nEND IONS\n\
BEGIN IONS\nTITLE=q2\nPEPMASS=500.0\n100.0 1\nEND IONS\n";

fn last_error() -> String {
    unsafe { CStr::from_ptr(sb_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn library_index_search_roundtrip() {
    unsafe {
        let mut lib = ptr::null_mut();
        assert_eq!(
            sb_library_parse_manifest(MANIFEST.as_ptr(), MANIFEST.len(), &mut lib),
            SbStatus::Ok
        );
        assert_eq!(
            (sb_library_n_analytes(lib), sb_library_n_spectra(lib)),
            (2, 2)
        );

        let mut index = ptr::null_mut();
        assert_eq!(sb_index_build(lib, 10.0, 5, 0.01, &mut index), SbStatus::Ok);
        sb_library_free(lib);

        let mut res = ptr::null_mut();
        assert_eq!(
            sb_index_search_mgf(index, MGF.as_ptr(), MGF.len(), &mut res),
            SbStatus::Ok
        );
        assert_eq!(sb_results_query_count(res), 2);
        assert_eq!(
            CStr::from_ptr(sb_results_query_id(res, 0))
                .to_str()
                .unwrap(),
            "q1"
        );
        assert_eq!(sb_results_hit_count(res, 0), 1);
        let mut hit = SbHit {
            score: 0.0,
            analyte_key: ptr::null(),
        };
        assert_eq!(sb_results_hit(res, 0, 0, &mut hit), SbStatus::Ok);
        assert_eq!(
            CStr::from_ptr(hit.analyte_key).to_str().unwrap(),
            "QNAYBMKLOCPYGJ"
        );
        assert!(hit.score > 0.9 && hit.score <= 1.0);
        // q2 has no precursor candidates
        assert_eq!(sb_results_hit_count(res, 1), 0);
        assert!(!sb_results_query_failed(res, 1));
        assert_eq!(sb_results_hit(res, 1, 0, &mut hit), SbStatus::Invalid);
        assert!(sb_results_query_id(res, 9).is_null());
        sb_results_free(res);
        sb_index_free(index);
    }
}

#[test]
fn manifest_from_disk_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lib.jsonl");
    std::fs::write(&path, MANIFEST).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut lib = ptr::null_mut();
        assert_eq!(
            sb_library_load_manifest(cpath.as_ptr(), &mut lib),
            SbStatus::Ok
        );
        sb_library_free(lib);

        let missing = CString::new(dir.path().join("nope.jsonl").to_str().unwrap()).unwrap();
        assert_eq!(
            sb_library_load_manifest(missing.as_ptr(), &mut lib),
            SbStatus::Io
        );
        assert!(lib.is_null());
        assert!(last_error().contains("nope.jsonl"));

        let bad = b"{not json}\n";
        assert_eq!(
            sb_library_parse_manifest(bad.as_ptr(), bad.len(), &mut lib),
            SbStatus::Parse
        );
        assert_eq!(
            sb_library_load_manifest(ptr::null(), &mut lib),
            SbStatus::NullPointer
        );
        let not_utf8 = [0xffu8, 0];
        assert_eq!(
            sb_library_load_manifest(not_utf8.as_ptr().cast(), &mut lib),
            SbStatus::InvalidUtf8
        );
        // freeing null is a no-op
        sb_library_free(ptr::null_mut());
        sb_index_free(ptr::null_mut());
        sb_results_free(ptr::null_mut());
    }
}

#[test]
fn scalar_functions() {
    unsafe {
        let (mz, it) = ([44.05, 72.04], [100.0, 20.0]);
        let mut score = 0.0;
        let mut matched = 0usize;
        let st = sb_modified_cosine(
            90.055,
            mz.as_ptr(),
            it.as_ptr(),
            2,
            90.055,
            mz.as_ptr(),
            it.as_ptr(),
            2,
            0.01,
            &mut score,
            &mut matched,
        );
        assert_eq!(st, SbStatus::Ok);
        assert!((score - 1.0).abs() < 1e-12);
        assert_eq!(matched, 2);

        let (a, b) = (CString::new("CCO").unwrap(), CString::new("CC").unwrap());
        let (mut d, mut exact) = (0usize, false);
        assert_eq!(
            sb_mces_distance(a.as_ptr(), b.as_ptr(), 15, &mut d, &mut exact),
            SbStatus::Ok
        );
        assert_eq!((d, exact), (1, true));
        let bad = CString::new("C1CC").unwrap();
        assert_eq!(
            sb_mces_distance(bad.as_ptr(), b.as_ptr(), 15, &mut d, ptr::null_mut()),
            SbStatus::Parse
        );
        assert!(!last_error().is_empty());

        let mut m = SbTallyMetrics::default();
        assert_eq!(sb_tally_metrics(178, 372, 443, &mut m), SbStatus::Ok);
        assert!((m.precision * 100.0 - 32.36).abs() < 0.01);
        assert!(!m.degenerate);
        assert!(last_error().is_empty());

        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [1u8, 0, 1, 0];
        let mut auc = 0.0;
        assert_eq!(
            sb_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc),
            SbStatus::Ok
        );
        assert_eq!(auc, 0.75);
        assert_eq!(
            sb_roc_auc(scores.as_ptr(), [1u8; 4].as_ptr(), 4, &mut auc),
            SbStatus::Invalid
        );

        let (x, y) = ([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]);
        let mut w = SbWelchResult::default();
        assert_eq!(
            sb_welch_t_test(
                x.as_ptr(),
                3,
                y.as_ptr(),
                3,
                SbAlternative::AGreater,
                &mut w
            ),
            SbStatus::Ok
        );
        assert_eq!(w.p, 0.5);
        assert_eq!(
            sb_welch_t_test(
                x.as_ptr(),
                3,
                ptr::null(),
                3,
                SbAlternative::BGreater,
                &mut w
            ),
            SbStatus::NullPointer
        );

        assert!(CStr::from_ptr(sb_version())
            .to_str()
            .unwrap()
            .starts_with("0."));
    }
}

#[test]
fn header_declares_every_export_and_compiles() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/specbench.h"))
        .expect("header generated by build.rs");
    let src = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 18, "found {exports:?}");
    for name in &exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    for ty in [
        "SbStatus",
        "SbLibrary",
        "SbIndex",
        "SbResults",
        "SbHit",
        "SbTallyMetrics",
        "SbWelchResult",
    ] {
        assert!(
            header.contains(&format!("typedef struct {ty}"))
                || header.contains(&format!("typedef enum {ty}"))
        );
    }

    // Syntax check with the system C compiler when one is available.
    let dir = tempfile::tempdir().unwrap();
    let c_file = dir.path().join("use.c");
    std::fs::write(
        &c_file,
        "#include \"specbench.h\"\nint main(void) { SbLibrary *l = 0; return sb_library_free(l), SB_STATUS_OK; }\n",
    )
    .unwrap();
    for cc in ["cc", "clang", "gcc"] {
        let out = std::process::Command::new(cc)
            .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
            .arg(root.join("include"))
            .arg(&c_file)
            .output();
        if let Ok(out) = out {
            assert!(
                out.status.success(),
                "{cc}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            return;
        }
    }
}
