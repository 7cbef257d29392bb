use condop::instance::InstanceBody;
use condop::report::{exit, exit_code_for, run, Command, Settings};
use condop::{Error, InstanceFile};

fn location(text: &str) -> String {
    match InstanceFile::parse(text).unwrap_err() {
        Error::Instance { location, .. } => location,
        other => panic!("expected an instance error, got {other:?}"),
    }
}

#[test]
fn errors_name_the_offending_field() {
    let two = r#"[{"id": "a", "weight": 1}, {"id": "b", "weight": 1}]"#;
    assert_eq!(
        location(
            r#"{"points": [{"id": "a", "weight": 1}, {"id": "a", "weight": 1}], "partition": [["a"]], "u": [[1,0],[1,0]], "w": [[1,0],[1,0]]}"#
        ),
        "points[1].id"
    );
    assert_eq!(
        location(&format!(
            r#"{{"points": {two}, "partition": [["a", "c"]], "u": [[1,0],[1,0]], "w": [[1,0],[1,0]]}}"#
        )),
        "partition[0][1]"
    );
    assert!(location(&format!(
        r#"{{"points": {two}, "partition": [["a", "b"]], "u": [[1,0]], "w": [[1,0],[1,0]]}}"#
    ))
    .starts_with('u'));
    assert!(location(r#"{"points": [}"#).starts_with("line 1"));
    assert!(location(r#"{"recipe": {"kind": "vertical_strip", "resolution": 1}}"#).starts_with("recipe"));
}

#[test]
fn recipe_instances_check_like_their_expansion() {
    let recipe =
        InstanceFile::parse(r#"{"recipe": {"kind": "equality_case", "seed": 3, "n_points": 6, "n_blocks": 2}}"#)
            .unwrap();
    let InstanceBody::Recipe(r) = &recipe.body else {
        panic!("not a recipe")
    };
    let (spec, _) = r.build().unwrap();
    let explicit = InstanceFile::from_spec(&spec).unwrap();
    let a = run(Command::Check, Some(&recipe), Settings::default()).unwrap();
    let b = run(Command::Check, Some(&explicit), Settings::default()).unwrap();
    // the digest names the file as written, so it differs; the findings do not
    assert_ne!(a.instance_digest, b.instance_digest);
    assert_eq!(a.verdicts, b.verdicts);
    assert_eq!(a.assertions, b.assertions);
    assert_eq!(a.exit_code, exit::OK);
}

#[test]
fn supp_tol_from_file_is_honoured_and_overridable() {
    let text = r#"{"points": [{"id": "a", "weight": 1}, {"id": "b", "weight": 1}], "partition": [["a", "b"]],
                   "u": [[1, 0], [1e-9, 0]], "w": [[1, 0], [1, 0]], "supp_tol": 1e-6}"#;
    let inst = InstanceFile::parse(text).unwrap();
    let r = run(Command::Check, Some(&inst), Settings::default()).unwrap();
    assert_eq!(r.supp_tol, 1e-6);
    let s = Settings {
        supp_tol: Some(1e-12),
        ..Settings::default()
    };
    assert_eq!(run(Command::Check, Some(&inst), s).unwrap().supp_tol, 1e-12);
}

#[test]
fn kernel_files_are_rejected_by_operator_commands() {
    let inst = InstanceFile::parse(r#"{"points": [{"id": "s", "weight": 1}], "kernel": [[[2, 0]]]}"#).unwrap();
    let err = run(Command::Polar, Some(&inst), Settings::default()).unwrap_err();
    assert_eq!(exit_code_for(&err), exit::INPUT);
    let ok = run(Command::Kernel, Some(&inst), Settings::default()).unwrap();
    assert_eq!(ok.exit_code, exit::OK);
}

/// Replays the fuzz corpus through the fuzz targets' round-trip check.
#[test]
fn fuzz_corpus_seeds_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/instance_roundtrip");
    let mut parsed = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let Ok(inst) = InstanceFile::parse(&text) else { continue };
        parsed += 1;
        let canonical = inst.to_canonical_json();
        let back = InstanceFile::parse(&canonical).unwrap();
        assert_eq!(back.to_canonical_json(), canonical);
        assert_eq!(back.digest(), inst.digest());
        assert_eq!(
            InstanceFile::parse(&inst.to_pretty_json()).unwrap().digest(),
            inst.digest()
        );
    }
    assert!(parsed >= 6, "only {parsed} corpus seeds parsed");
}
