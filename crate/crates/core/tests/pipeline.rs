use rasim_core::baselines::{run_scheme, SchemeId, SchemeSettings};
use rasim_core::harness::{
    generate_multiuser_scenario, run_experiment, scenario_digest, ExperimentId, ExperimentSpec, RunConfig,
};
use rasim_core::opt_ao::SolutionStatus;

fn small_spec(id: ExperimentId) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(id);
    spec.trials = 4;
    spec.base_seed = 11;
    spec.settings.array_grid = 8;
    spec
}

#[test]
fn experiment_output_does_not_depend_on_thread_count() {
    let mut spec = small_spec(ExperimentId::ThetaMaxSweep);
    spec.grid = vec![0.0, 0.4];
    spec.schemes = vec![SchemeId::AoMmse, SchemeId::ArrayWise, SchemeId::RandomOrientation];
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_experiment(&spec).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_experiment(&spec).unwrap());
    assert_eq!(serial.header, parallel.header);
    assert_eq!(serial.rows, parallel.rows);
}

#[test]
fn ula_sweep_rotatable_curve_dominates_fixed() {
    let out = run_experiment(&ExperimentSpec::new(ExperimentId::UlaSweep)).unwrap();
    let (x, series, v) = (
        out.column("n_x").unwrap(),
        out.column("series").unwrap(),
        out.column("snr_linear").unwrap(),
    );
    let value = |n: &str, s: &str| -> f64 {
        out.rows.iter().find(|r| r[x] == n && r[series] == s).unwrap()[v]
            .parse()
            .unwrap()
    };
    for n in out
        .rows
        .iter()
        .map(|r| r[x].clone())
        .collect::<std::collections::BTreeSet<_>>()
    {
        assert!(value(&n, "ra_exact") >= value(&n, "fixed_exact"), "n_x = {n}");
    }
}

#[test]
fn power_sweep_point_matches_standalone_runs() {
    let mut spec = small_spec(ExperimentId::PowerSweep);
    spec.grid = vec![10.0];
    spec.schemes = vec![SchemeId::FixedOrientation, SchemeId::TwoStage];
    let out = run_experiment(&spec).unwrap();
    let settings = SchemeSettings::default();
    for rec in &out.records {
        let sc = generate_multiuser_scenario(rec.seed).unwrap();
        assert_eq!(scenario_digest(&sc), rec.digest);
        for scheme in &spec.schemes {
            let standalone = run_scheme(*scheme, &sc, 0, &settings).unwrap();
            assert_eq!(rec.outcome(*scheme).unwrap().min_sinr, standalone.min_sinr());
        }
    }
}

#[test]
fn csv_written_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        "schema_version = 1\n[experiment]\ntrials = 2\nbase_seed = 3\nschemes = [\"ao_mmse\"]\ngrid = [2.0]\n",
    )
    .unwrap();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let mut spec = ExperimentSpec::from_config(ExperimentId::Convergence, &cfg).unwrap();
    let csv_path = dir.path().join("conv.csv");
    spec.output = Some(csv_path.clone());
    let out = run_experiment(&spec).unwrap();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, out.header);
    assert!(header.iter().any(|h| h == "rate_iter_0"));
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
}

#[test]
fn optimized_designs_beat_fixed_on_a_default_scenario() {
    let sc = generate_multiuser_scenario(5).unwrap();
    let settings = SchemeSettings::default();
    let fixed = run_scheme(SchemeId::FixedOrientation, &sc, 0, &settings)
        .unwrap()
        .min_sinr();
    let ao = run_scheme(SchemeId::AoMmse, &sc, 0, &settings).unwrap();
    assert_eq!(ao.status, SolutionStatus::Converged);
    assert!(ao.min_sinr() > fixed);
    assert!(run_scheme(SchemeId::TwoStage, &sc, 0, &settings).unwrap().min_sinr() > fixed);
}
