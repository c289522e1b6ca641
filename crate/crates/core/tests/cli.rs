use std::process::Command;

fn smash(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_smash")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn build_reports_csv() {
    let (code, out, _) = smash(&["build", "--n", "400", "--leaf-cap", "20"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    let err: f64 = row[header.iter().position(|&h| h == "relerr_fro").unwrap()].parse().unwrap();
    assert!(err < 1e-8);
}

#[test]
fn solve_emits_json_and_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("x.txt");
    let report = dir.path().join("r.json");
    let (code, _, _) = smash(&[
        "solve",
        "--kernel",
        "laplace-dlp",
        "--geometry",
        "circle",
        "--n",
        "256",
        "--tol",
        "1e-10",
        "--json",
        "--out",
        report.to_str().unwrap(),
        "--result",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v[0]["residual"].as_f64().unwrap() < 1e-12);
    assert!(v[0]["pointwise_error"].as_f64().unwrap() < 1e-8);
    let x = smash::io::read_vector(&sol, smash::io::VectorFormat::Text).unwrap();
    assert_eq!(x.len(), 256);
}

#[test]
fn matvec_round_trips_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("q.bin");
    let output = dir.path().join("z.bin");
    smash::io::write_vector(&input, &vec![1.0; 300], smash::io::VectorFormat::Binary).unwrap();
    let (code, _, _) = smash(&[
        "matvec",
        "--n",
        "300",
        "--binary",
        "--vector",
        input.to_str().unwrap(),
        "--result",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(smash::io::read_vector(&output, smash::io::VectorFormat::Binary).unwrap().len(), 300);
}

#[test]
fn invalid_input_exits_with_two() {
    assert_eq!(smash(&["build", "--geometry", "grid2d", "--n", "401"]).0, 2);
    assert_eq!(smash(&["solve", "--structure", "h2", "--n", "200"]).0, 2);
    assert_eq!(smash(&["experiment", "no_such_study"]).0, 2);
    assert_eq!(smash(&["build", "--kernel", "laplace-dlp", "--geometry", "interval", "--n", "100"]).0, 2);
    assert_eq!(smash(&["build", "--n", "200", "--tol", "2"]).0, 2);
}

#[test]
fn violated_residual_exits_with_three() {
    let (code, out, err) = smash(&["solve", "--n", "300", "--max-residual", "0"]);
    assert_eq!(code, 3, "{err}");
    assert!(out.contains("residual"));
}

#[test]
fn experiment_accepts_lists() {
    let (code, out, _) =
        smash(&["experiment", "rank_study", "--geometry", "circle", "--n", "256,512", "--tol", "1e-3,1e-6"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 5);
}
