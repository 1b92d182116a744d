use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ngmc_core::baseline::reduction_pct;
use ngmc_core::{
    compare, evaluate_placement, generate_scenario, generate_sweep, geo_mean_position, grid_search,
    run_replications, solve_ga, write_sweep_csv, AssociationMatrix, Genome, LinkMode, Method,
    PlacementProblem, PlacementSolution, ResultRecord, RunManifest, Scenario, SimReport,
    SimSummary, SweepRow, TrafficMode, Violation, Volume,
};

use crate::config::Config;
use crate::{
    Cli, CliError, Command, GenerateArgs, LinkArg, ReportArgs, ScenarioArg, SimulateArgs,
    SolveArgs, SweepArgs, TrafficArg,
};

struct Ctx {
    config: Config,
    seed: Option<u64>,
    out: Option<PathBuf>,
    quiet: bool,
    timestamp: bool,
    args: Vec<String>,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn manifest(
        &self,
        subcommand: &str,
        inputs: &[&Path],
        extra_outputs: &[&Path],
        seeds: Vec<u64>,
    ) -> RunManifest {
        let mut outputs: Vec<String> = self.out.iter().map(|p| p.display().to_string()).collect();
        outputs.extend(extra_outputs.iter().map(|p| p.display().to_string()));
        RunManifest {
            subcommand: subcommand.to_string(),
            args: self.args.clone(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs,
            seeds,
            config: serde_json::to_value(&self.config).expect("config serializes"),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Internal(format!("stdout: {e}")))
            }
        }
    }

    fn stamp(&self, record: &mut ResultRecord) {
        if self.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            record.timestamp = Some(format!("unix:{secs}"));
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

/// `<path>.manifest.json` next to a CSV output.
fn write_sidecar(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_file(Path::new(&name), &text)
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_result(path: &Path) -> Result<ResultRecord, CliError> {
    ResultRecord::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn describe(v: &Violation) -> String {
    match v {
        Violation::Association { ue, count } => format!("UE {ue} associated with {count} cells"),
        Violation::DistanceBelowMin { ue, cell, d2d } => {
            format!("UE {ue} is {d2d:.2} m from cell {cell}, below the minimum")
        }
        Violation::DistanceAboveMax { ue, cell, d2d } => {
            format!("UE {ue} is {d2d:.2} m from cell {cell}, above the maximum")
        }
        Violation::SpectralEfficiency { ue, se } => {
            format!("UE {ue} has SE {se} outside its bounds")
        }
        Violation::OutsideVolume { cell } => format!("cell {cell} is outside the volume"),
    }
}

fn fmt_point(p: &ngmc_core::Point3) -> String {
    format!("({:.2}, {:.2}, {:.2})", p.x, p.y, p.z)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = Config::load(cli.config.as_deref())?;
    config.apply_seed(cli.seed);
    let mut ctx = Ctx {
        config,
        seed: cli.seed,
        out: cli.out,
        quiet: cli.quiet,
        timestamp: cli.timestamp,
        args: std::env::args().skip(1).collect(),
    };
    let inputs: Vec<PathBuf> = cli.config.into_iter().collect();
    match cli.command {
        Command::Generate(a) => generate(&ctx, &a, &inputs),
        Command::Solve(a) => solve(&ctx, &a, &inputs),
        Command::Baseline(a) => baseline(&ctx, &a, &inputs),
        Command::Sweep(a) => sweep(&ctx, &a, &inputs),
        Command::Simulate(a) => simulate(&mut ctx, &a, &inputs),
        Command::Report(a) => report(&ctx, &a, &inputs),
    }
}

fn with_inputs<'a>(base: &'a [PathBuf], more: &[&'a Path]) -> Vec<&'a Path> {
    base.iter()
        .map(PathBuf::as_path)
        .chain(more.iter().copied())
        .collect()
}

fn generate(ctx: &Ctx, a: &GenerateArgs, inputs: &[PathBuf]) -> Result<(), CliError> {
    if a.ues == 0 {
        return Err(CliError::Usage("--ues must be at least 1".into()));
    }
    if !(a.half_extent > 0.0 && a.half_extent.is_finite()) {
        return Err(CliError::Usage("--half-extent must be positive".into()));
    }
    let seed = ctx.seed.unwrap_or(0);
    let random = generate_scenario(a.ues, Volume::cube(a.half_extent), a.ue_z, seed)?;
    let scenario = if a.cells != 1 || a.label.is_some() {
        let label = a
            .label
            .clone()
            .unwrap_or_else(|| random.label().to_string());
        Scenario::new(label, *random.volume(), a.cells, random.ues().to_vec())?
    } else {
        random
    };
    let manifest = ctx.manifest("generate", &with_inputs(inputs, &[]), &[], vec![seed]);
    ctx.emit(&scenario.to_json(Some(&manifest)))?;
    ctx.info(format!(
        "generated {} with {} UEs",
        scenario.label(),
        scenario.len()
    ));
    Ok(())
}

fn problem_for(ctx: &Ctx, scenario: Scenario) -> Result<PlacementProblem, CliError> {
    Ok(PlacementProblem::new(
        scenario,
        ctx.config.model.clone(),
        ctx.config.regression,
    )?)
}

fn record_of(
    scenario: &Scenario,
    method: Method,
    sol: &PlacementSolution,
    seed: u64,
) -> ResultRecord {
    ResultRecord::from_capacity(
        scenario,
        method,
        &sol.positions,
        &sol.serving(),
        &sol.report,
        seed,
    )
}

fn solve(ctx: &Ctx, a: &SolveArgs, inputs: &[PathBuf]) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario)?;
    let mut problem = problem_for(ctx, scenario.clone())?;
    problem.free_z = a.free_z;
    let sol = solve_ga(&problem, &ctx.config.ga)?;
    if !sol.feasible {
        ctx.info("warning: no feasible placement found");
    }
    let mut record = record_of(&scenario, Method::Obtained, &sol, ctx.config.ga.seed);
    for (c, p) in sol.positions.iter().enumerate() {
        ctx.info(format!("cell {c}: {}", fmt_point(p)));
    }
    ctx.info(format!(
        "aggregate capacity {:.6} Mbit/s after {} generations ({} evaluations)",
        sol.fitness / 1e6,
        sol.generations_run,
        sol.evaluations
    ));
    if let Some(step) = a.grid_oracle {
        let grid = grid_search(&problem, step)?;
        let ratio = if grid.fitness > 0.0 {
            sol.fitness / grid.fitness
        } else {
            f64::NAN
        };
        ctx.info(format!(
            "grid oracle (step {step} m): {} at {:.6} Mbit/s, ratio {ratio:.6}",
            fmt_point(&grid.positions[0]),
            grid.fitness / 1e6
        ));
    }
    record.manifest = Some(ctx.manifest(
        "solve",
        &with_inputs(inputs, &[&a.scenario]),
        &[],
        vec![ctx.config.ga.seed],
    ));
    ctx.stamp(&mut record);
    ctx.emit(&record.to_json())
}

fn baseline(ctx: &Ctx, a: &ScenarioArg, inputs: &[PathBuf]) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario)?;
    let mut problem = problem_for(ctx, scenario.clone())?;
    problem.ngmc_count = 1;
    let g = geo_mean_position(&scenario, problem.fixed_z)?;
    let sol = evaluate_placement(&problem, &Genome::single(g))?;
    if !sol.feasible {
        let v = ngmc_core::check_feasibility(&sol.positions, &sol.assoc, &problem);
        ctx.info("warning: geo-mean position is infeasible, capacity recorded as 0");
        for x in &v {
            ctx.info(format!("  {}", describe(x)));
        }
    }
    ctx.info(format!(
        "geo-mean {}: aggregate capacity {:.6} Mbit/s",
        fmt_point(&g),
        sol.fitness / 1e6
    ));
    let mut record = record_of(&scenario, Method::GeoMean, &sol, 0);
    record.manifest = Some(ctx.manifest(
        "baseline",
        &with_inputs(inputs, &[&a.scenario]),
        &[],
        vec![],
    ));
    ctx.stamp(&mut record);
    ctx.emit(&record.to_json())
}

fn sweep(ctx: &Ctx, a: &SweepArgs, inputs: &[PathBuf]) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario)?;
    if scenario.len() != 2 {
        return Err(CliError::Usage(format!(
            "sweep needs a scenario with exactly 2 UEs, found {}",
            scenario.len()
        )));
    }
    let mut problem = problem_for(ctx, scenario.clone())?;
    problem.ngmc_count = 1;
    let z = a.z.unwrap_or(problem.fixed_z);
    problem.fixed_z = z;
    problem.validate()?;
    let ues = scenario.ues();
    let points = generate_sweep(&ues[0].position, &ues[1].position, a.margin, a.step, z)?;
    let table = ctx.config.mcs_table()?;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let sol = evaluate_placement(&problem, &Genome::single(p))?;
        let tput = if a.simulate && sol.feasible {
            let r = run_replications(
                &scenario,
                &sol.positions,
                &sol.assoc,
                &problem.cfg,
                &problem.reg,
                &ctx.config.sim,
                &table,
                1,
            )?;
            Some(r.aggregate_throughput_bps)
        } else {
            None
        };
        ctx.info(format!(
            "{}: {:.6} Mbit/s{}",
            fmt_point(&p),
            sol.fitness / 1e6,
            tput.map(|t| format!(", simulated {:.6} Mbit/s", t / 1e6))
                .unwrap_or_default()
        ));
        rows.push(SweepRow {
            position: p,
            aggregate_capacity_bps: sol.fitness,
            aggregate_throughput_bps: tput,
        });
    }
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows)?;
    ctx.emit(std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    if let Some(out) = &ctx.out {
        let seeds = if a.simulate {
            vec![ctx.config.sim.seed]
        } else {
            vec![]
        };
        write_sidecar(
            out,
            &ctx.manifest("sweep", &with_inputs(inputs, &[&a.scenario]), &[], seeds),
        )?;
    }
    Ok(())
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs, inputs: &[PathBuf]) -> Result<(), CliError> {
    let sim = &mut ctx.config.sim;
    if let Some(t) = a.traffic {
        sim.traffic_mode = match t {
            TrafficArg::FullBuffer => TrafficMode::FullBuffer,
            TrafficArg::Cbr => TrafficMode::Cbr,
        };
    }
    if let Some(r) = a.rate {
        sim.cbr_rate_bps = r;
    }
    if let Some(s) = a.slots {
        sim.duration_slots = s;
    }
    if let Some(l) = a.link_mode {
        sim.link_mode = match l {
            LinkArg::SeLine => LinkMode::SeLine,
            LinkArg::McsQuantized => LinkMode::McsQuantized,
        };
    }
    if a.harq {
        sim.harq_enabled = true;
    }
    if let Some(p) = a.error_prob {
        sim.per_tx_error_prob = p;
    }
    sim.validate()?;
    if a.replications == 0 {
        return Err(CliError::Usage("--replications must be at least 1".into()));
    }

    let scenario = load_scenario(&a.scenario)?;
    let base = load_result(&a.result)?;
    if base.scenario_label != scenario.label() {
        return Err(CliError::Usage(format!(
            "result is for scenario {:?}, not {:?}",
            base.scenario_label,
            scenario.label()
        )));
    }
    if base.per_ue.len() != scenario.len() {
        return Err(CliError::Usage(
            "result and scenario list different UEs".into(),
        ));
    }
    let positions = base.cell_positions();
    let assoc = if positions.len() == 1 {
        AssociationMatrix::single_cell(scenario.len())
    } else {
        AssociationMatrix::from_serving(&base.serving(), positions.len())?
    };
    let table = ctx.config.mcs_table()?;
    let cfg = &ctx.config;
    let report: SimReport = run_replications(
        &scenario,
        &positions,
        &assoc,
        &cfg.model,
        &cfg.regression,
        &cfg.sim,
        &table,
        a.replications,
    )?;

    let mean = report.mean_delay_s();
    let p90 = report.delay_percentile_s(0.9);
    ctx.info(format!(
        "{} replications x {} slots: aggregate throughput {:.6} Mbit/s",
        a.replications,
        cfg.sim.duration_slots,
        report.aggregate_throughput_bps / 1e6
    ));
    if let (Some(m), Some(p)) = (mean, p90) {
        ctx.info(format!(
            "mean delay {:.6} ms, p90 {:.6} ms",
            m * 1e3,
            p * 1e3
        ));
    }

    let seeds: Vec<u64> = (0..a.replications as u64)
        .map(|i| cfg.sim.seed.wrapping_add(i))
        .collect();
    let in_paths = with_inputs(inputs, &[&a.scenario, &a.result]);
    let extra: Vec<&Path> = a.delay_csv.iter().map(PathBuf::as_path).collect();
    let manifest = ctx.manifest("simulate", &in_paths, &extra, seeds);
    if let Some(path) = &a.delay_csv {
        let mut buf = Vec::new();
        report.write_delay_csv(&mut buf)?;
        write_file(path, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
        write_sidecar(path, &manifest)?;
    }
    let mut record = base;
    record.sim = Some(SimSummary {
        per_flow_throughput_bps: report.per_flow_throughput_bps.clone(),
        aggregate_throughput_bps: report.aggregate_throughput_bps,
        mean_delay_s: mean,
        p90_delay_s: p90,
        replications: report.replications,
    });
    record.timestamp = None;
    record.manifest = Some(manifest);
    ctx.stamp(&mut record);
    ctx.emit(&record.to_json())
}

const REPORT_HEADER: [&str; 15] = [
    "scenario_label",
    "diameter_m",
    "obtained_capacity_bps",
    "geo_mean_capacity_bps",
    "capacity_gain_pct",
    "obtained_throughput_bps",
    "geo_mean_throughput_bps",
    "throughput_gain_pct",
    "obtained_mean_delay_s",
    "geo_mean_mean_delay_s",
    "delay_reduction_pct",
    "obtained_p90_delay_s",
    "geo_mean_p90_delay_s",
    "p90_delay_reduction_pct",
    "replications",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn report(ctx: &Ctx, a: &ReportArgs, inputs: &[PathBuf]) -> Result<(), CliError> {
    let mut pairs: BTreeMap<String, (Option<ResultRecord>, Option<ResultRecord>)> = BTreeMap::new();
    for path in &a.results {
        let r = load_result(path)?;
        let slot = pairs.entry(r.scenario_label.clone()).or_default();
        let target = match r.method {
            Method::Obtained => &mut slot.0,
            Method::GeoMean => &mut slot.1,
        };
        if target.is_some() {
            return Err(CliError::Usage(format!(
                "two {} results for scenario {:?}",
                r.method, r.scenario_label
            )));
        }
        *target = Some(r);
    }
    let unmatched: Vec<&str> = pairs
        .iter()
        .filter(|(_, (o, g))| o.is_none() || g.is_none())
        .map(|(k, _)| k.as_str())
        .collect();
    if !unmatched.is_empty() {
        return Err(CliError::Usage(format!(
            "mismatched scenario labels, no obtained/geo-mean pair for: {}",
            unmatched.join(", ")
        )));
    }

    let mut w = csv_buffer();
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for (label, (o, g)) in &pairs {
        let (o, g) = (o.as_ref().expect("paired"), g.as_ref().expect("paired"));
        let gains = compare(o, g, o.diameter_m.or(g.diameter_m).unwrap_or(0.0));
        let os = o.sim.as_ref();
        let gs = g.sim.as_ref();
        let p90_red = match (
            os.and_then(|s| s.p90_delay_s),
            gs.and_then(|s| s.p90_delay_s),
        ) {
            (Some(a), Some(b)) => reduction_pct(a, b),
            _ => None,
        };
        let reps = os
            .map(|s| s.replications)
            .unwrap_or(0)
            .min(gs.map(|s| s.replications).unwrap_or(0));
        ctx.info(format!(
            "{label}: capacity gain {}%, diameter {:.2} m",
            gains
                .capacity_gain_pct
                .map(|x| format!("{x:.2}"))
                .unwrap_or_else(|| "n/a".into()),
            gains.diameter
        ));
        w.write_record([
            label.clone(),
            cell(o.diameter_m.or(g.diameter_m)),
            o.aggregate_capacity_bps.to_string(),
            g.aggregate_capacity_bps.to_string(),
            cell(gains.capacity_gain_pct),
            cell(os.map(|s| s.aggregate_throughput_bps)),
            cell(gs.map(|s| s.aggregate_throughput_bps)),
            cell(gains.throughput_gain_pct),
            cell(os.and_then(|s| s.mean_delay_s)),
            cell(gs.and_then(|s| s.mean_delay_s)),
            cell(gains.delay_reduction_pct),
            cell(os.and_then(|s| s.p90_delay_s)),
            cell(gs.and_then(|s| s.p90_delay_s)),
            cell(p90_red),
            if reps > 0 {
                reps.to_string()
            } else {
                String::new()
            },
        ])
        .map_err(csv_err)?;
    }
    let buf = w
        .into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    ctx.emit(std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    if let Some(out) = &ctx.out {
        let paths: Vec<&Path> = a.results.iter().map(PathBuf::as_path).collect();
        write_sidecar(
            out,
            &ctx.manifest("report", &with_inputs(inputs, &paths), &[], vec![]),
        )?;
    }
    Ok(())
}

fn csv_buffer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}
