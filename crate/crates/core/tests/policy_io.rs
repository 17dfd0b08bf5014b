use relay_aoi::policy::{parse_policy, render_policy};
use relay_aoi::{
    load_policy, load_policy_expecting, save_policy, Action, Error, PolicyFile, PolicyTable,
    SystemParams, TruncationLevel,
};

fn sample(n: u32) -> PolicyFile {
    let n = TruncationLevel::new(n).unwrap();
    let policy = PolicyTable::from_fn(n, |s| {
        let code = (s.sources[0].y + 2 * s.sources[1].x + s.sources[0].theta) % 9;
        Action::from_code(code as u8).unwrap()
    });
    PolicyFile {
        policy,
        params_hash: SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap().fingerprint(),
        lambda: 1.365_661_621_093_75,
    }
}

#[test]
fn file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.txt");
    let file = sample(4);
    save_policy(&file, &path).unwrap();
    let back = load_policy(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.lambda.to_bits(), file.lambda.to_bits());
}

#[test]
fn wrong_truncation_is_a_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.txt");
    save_policy(&sample(3), &path).unwrap();
    let err = load_policy_expecting(&path, TruncationLevel::new(4).unwrap()).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)), "{err}");
    assert!(load_policy_expecting(&path, TruncationLevel::new(3).unwrap()).is_ok());
}

#[test]
fn damaged_files_are_rejected() {
    let text = render_policy(&sample(2));

    let truncated: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
    assert!(matches!(parse_policy(&truncated), Err(Error::Parse { .. })));

    let bumped = text.replace("version=1", "version=2");
    assert!(matches!(parse_policy(&bumped), Err(Error::VersionMismatch { .. })));

    let bad_code = text.replacen("\n0", "\n9", 1);
    assert!(parse_policy(&bad_code).is_err());

    let trailing = format!("{text}extra\n");
    assert!(parse_policy(&trailing).is_err());

    assert!(matches!(
        load_policy("/nonexistent/relay-aoi/policy.txt"),
        Err(Error::Io { .. })
    ));
}
