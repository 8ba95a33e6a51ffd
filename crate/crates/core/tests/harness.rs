use std::fs;
use std::path::Path;

use dsgda::harness::cli;
use dsgda::harness::{
    export_trajectory, import_csv, run_batch, run_config, run_recipe, write_summary, Algorithm,
    Format, Init, ParamSpec, Recipe, RecipeOpts, Record, RunConfig, Sink, TrajectoryTable,
};
use dsgda::measures::OutcomeKind;
use dsgda::solvers::StopMode;
use dsgda::{Error, StoppingRule};
use proptest::prelude::*;
use tempfile::tempdir;

const KL_GRID: &str = r#"
problem = "kl_nonconcave"
algorithm = "dsgda"
init = "grid(9)"
outputs = "kl"
params = { c = 0.04, alpha = 0.04, beta = 0.8, mu = 0.8, r1 = 0.125, r2 = 0.125 }
stop = { tol = 1e-6, max_iters = 100000, mode = "residual" }
"#;

fn one_step(problem: &str) -> RunConfig {
    RunConfig::from_toml(&format!(
        "problem = \"{problem}\"\nalgorithm = \"gda\"\ninit = [0.5, 0.25]\nstop = {{ tol = 1e-12, max_iters = 1 }}\n"
    ))
    .unwrap()
}

#[test]
fn csv_export_round_trips() {
    let dir = tempdir().unwrap();
    let r = run_config(&one_step("toy_bilinear"), None).unwrap();
    assert_eq!(r.iterations, 1);
    let path = dir.path().join("nested/one.csv");
    export_trajectory(&r.trajectory, &path, Format::Csv).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "iter,x0,y0,z0,v0,gs_x,gs_y");
    assert_eq!(
        import_csv(&path).unwrap(),
        TrajectoryTable::from(&r.trajectory)
    );
}

#[test]
fn json_export_has_one_object_per_row() {
    let dir = tempdir().unwrap();
    let r = run_config(&one_step("concave_toy"), None).unwrap();
    let path = dir.path().join("one.json");
    export_trajectory(&r.trajectory, &path, Format::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["iter"], 1);
    assert_eq!(rows[0]["x0"].as_f64(), Some(0.5));
    let keys: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["iter", "x0", "y0", "z0", "v0", "gs_x", "gs_y"]);
}

#[test]
fn import_rejects_foreign_layouts() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "iter,x0,w0,gs_x,gs_y\n0,1,2,3,4\n").unwrap();
    assert!(matches!(import_csv(&path), Err(Error::Config { .. })));
    assert!(matches!(
        import_csv(&dir.path().join("missing.csv")),
        Err(Error::File { .. })
    ));
}

#[test]
fn kl_lattice_export_ends_at_a_gs_point() {
    let dir = tempdir().unwrap();
    let cfg = RunConfig::from_toml(KL_GRID).unwrap();
    let sink = Sink::new(dir.path(), Format::Csv);
    let results = run_batch(&cfg.expand().unwrap(), 3, Some(&sink));
    assert_eq!(results.len(), 9);
    for r in results {
        let r = r.unwrap();
        assert_eq!(r.outcome.kind, OutcomeKind::Converged);
        let table = import_csv(r.trajectory_file.as_deref().unwrap()).unwrap();
        let (gx, gy) = *table.residuals.last().unwrap();
        assert!(gx < 1e-4 && gy < 1e-4);
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn batches_are_deterministic_across_thread_counts() {
    let cfg = RunConfig::from_toml(KL_GRID).unwrap();
    let members = cfg.expand().unwrap();
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    let ra = run_batch(&members, 1, Some(&Sink::new(a.path(), Format::Csv)));
    let rb = run_batch(&members, 4, Some(&Sink::new(b.path(), Format::Csv)));
    write_summary(
        ra.iter().map(Result::as_ref),
        &a.path().join("summary.json"),
    )
    .unwrap();
    write_summary(
        rb.iter().map(Result::as_ref),
        &b.path().join("summary.json"),
    )
    .unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.len(), 10);
    assert_eq!(
        fa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        fb.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for (x, y) in fa.iter().zip(&fb) {
        assert!(x.1 == y.1, "{} differs", x.0);
    }
}

#[test]
fn empty_batch_gives_no_results() {
    assert!(run_batch(&[], 4, None).is_empty());
}

#[test]
fn failing_member_does_not_stop_the_batch() {
    let good = one_step("toy_bilinear");
    let mut bad = good.clone();
    bad.problem = "nope".into();
    let out = run_batch(&[good.clone(), bad, good], 2, None);
    assert!(out[0].is_ok() && out[2].is_ok());
    assert!(matches!(&out[1], Err(Error::Config { field, .. }) if field == "problem"));
}

#[test]
fn output_stems_stay_inside_the_sink() {
    let sink = Sink::new("out", Format::Csv);
    assert!(sink.path_for("a/b", "csv").is_ok());
    assert!(sink.path_for("../escape", "csv").is_err());
    assert!(sink.path_for("/abs", "csv").is_err());
}

#[test]
fn descent_audit_recipe_writes_certificates() {
    let dir = tempdir().unwrap();
    let opts = RecipeOpts {
        sink: Some(Sink::new(dir.path(), Format::Csv)),
        parallelism: 2,
        ..RecipeOpts::default()
    };
    let rep = run_recipe(&Recipe::builtin("descent-audit").unwrap(), &opts).unwrap();
    assert_eq!(rep.audits.len(), 2);
    for a in &rep.audits {
        let a = a.as_ref().unwrap();
        assert!(a.min_margin >= -a.tolerance && a.max_phi_increase <= a.tolerance);
        let text = fs::read_to_string(a.file.as_ref().unwrap()).unwrap();
        assert_eq!(text.lines().count(), a.steps + 1);
    }
}

#[test]
fn rho_recipe_reports_the_witnesses() {
    let rep = run_recipe(
        &Recipe::builtin("rho-scan").unwrap(),
        &RecipeOpts::default(),
    )
    .unwrap();
    let bilinear = &rep.rho[0];
    assert!((bilinear.witness_rho.unwrap() + 4.0 / 89.0).abs() < 1e-12);
    assert!(bilinear.min_rho <= bilinear.witness_rho.unwrap());
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn dsgda(args: &[&str]) -> i32 {
    cli::run(std::iter::once("dsgda").chain(args.iter().copied()))
}

#[test]
fn cli_exit_statuses() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let good = write(dir.path(), "good.toml", KL_GRID);
    assert_eq!(dsgda(&["--out", out, "--parallel", "2", "run", &good]), 0);
    assert!(Path::new(out).join("kl-summary.json").exists());
    assert!(Path::new(out).join("kl-8.csv").exists());

    let unknown = write(
        dir.path(),
        "unknown.toml",
        &format!("{KL_GRID}colour = \"red\"\n"),
    );
    assert_eq!(dsgda(&["--out", out, "run", &unknown]), 1);
    let missing = dir.path().join("missing.toml");
    assert_eq!(dsgda(&["--out", out, "run", missing.to_str().unwrap()]), 1);
    assert_eq!(dsgda(&["--out", out, "recipe", "no-such-recipe"]), 1);
    assert_eq!(dsgda(&["frobnicate"]), 1);
    assert_eq!(dsgda(&[]), 1);
    assert_eq!(dsgda(&["--help"]), 0);
    assert_eq!(dsgda(&["measure", "kl_nonconcave", "0,0"]), 0);
    assert_eq!(dsgda(&["measure", "kl_nonconcave", "0;0"]), 1);

    let infinite = write(
        dir.path(),
        "infinite.toml",
        "problem = \"sixth_order\"\nalgorithm = \"eg\"\ninit = [1.0, 1.0]\nparams = { step = inf }\n",
    );
    assert_eq!(dsgda(&["--out", out, "run", &infinite]), 1);
}

#[test]
fn cli_overrides_reach_every_member() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write(dir.path(), "c.toml", KL_GRID);
    assert_eq!(
        dsgda(&[
            "--out",
            out.to_str().unwrap(),
            "--max-iters",
            "3",
            "--format",
            "json",
            "run",
            &cfg
        ]),
        0
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("kl-summary.json")).unwrap()).unwrap();
    for row in summary.as_array().unwrap() {
        assert!(row["iterations"].as_u64().unwrap() <= 3);
    }
    assert!(out.join("kl-0.json").exists());
}

#[test]
fn config_field_errors_name_the_field() {
    let cfg = |text: &str| RunConfig::from_toml(text).and_then(|c| c.validate());
    let field = |r: Result<(), Error>| match r {
        Err(Error::Config { field, .. }) => field,
        other => panic!("{other:?}"),
    };
    assert_eq!(
        field(cfg("problem = \"x\"\nalgorithm = \"gda\"\ninit = [0, 0]\n")),
        "problem"
    );
    let missing = field(cfg(
        "problem = \"forsaken\"\nalgorithm = \"dsgda\"\ninit = [0, 0]\nparams = { c = 0.1 }\n",
    ));
    assert!(missing.starts_with("params."), "{missing}");
    assert_eq!(
        field(cfg(
            "problem = \"forsaken\"\nalgorithm = \"gda\"\ninit = [9, 0]\n"
        )),
        "init"
    );
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let algo = prop_oneof![
        Just(Algorithm::Dsgda),
        Just(Algorithm::SgdaPrimal),
        Just(Algorithm::SgdaDual),
        Just(Algorithm::Gda),
        Just(Algorithm::Eg),
    ];
    let init = prop_oneof![
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| Init::Point(x, y)),
        (1usize..6).prop_map(|k| Init::Grid(k * k)),
        (1usize..50).prop_map(Init::Random),
    ];
    let opt = || prop::option::of(1e-4f64..1.0);
    let params = (opt(), opt(), opt(), opt(), opt(), opt(), opt()).prop_map(
        |(c, alpha, beta, mu, r1, r2, step)| ParamSpec {
            c,
            alpha,
            beta,
            mu,
            r1,
            r2,
            step,
        },
    );
    let mode = prop_oneof![
        Just(StopMode::ProximalGap),
        Just(StopMode::Residual),
        Just(StopMode::Step)
    ];
    (
        algo,
        init,
        "[a-z][a-z0-9-]{0,8}",
        prop::option::of(any::<u64>()),
        params,
        (1e-12f64..1.0, 1u64..1_000_000, mode),
        1u64..100,
    )
        .prop_map(
            |(algorithm, init, outputs, seed, params, (tol, max_iters, mode), every_k)| RunConfig {
                problem: "kl_nonconcave".into(),
                algorithm,
                init,
                outputs,
                seed,
                params,
                stop: StoppingRule {
                    tol,
                    max_iters,
                    mode,
                },
                record: Record { every_k },
            },
        )
}

proptest! {
    #[test]
    fn config_round_trips_through_toml(cfg in arb_config()) {
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
