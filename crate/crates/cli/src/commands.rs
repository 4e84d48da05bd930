use std::path::Path;

use lwrdue::io::{self, FormatError, GridConfig, RunConfig};
use lwrdue::network::{RawLink, RawOd, RawPath};
use lwrdue::{
    model_by_name, run_dnl, solve_due, validate_network, DnlError, FifoPriority, JunctionModel, Network, NodeId,
    PathId, SolverError,
};

use crate::{usage, DnlArgs, DueArgs, Failure, PathsArgs, RunArgs};

fn input_err(e: FormatError) -> Failure {
    match e {
        FormatError::Invalid(_) | FormatError::Unreachable { .. } => Failure::invalid(e),
        _ => Failure::parse(e),
    }
}

fn dnl_err(e: DnlError) -> Failure {
    match e {
        DnlError::Shape { .. } | DnlError::BadRate { .. } => Failure::invalid(e),
        _ => Failure::runtime(e),
    }
}

fn solver_err(e: SolverError) -> Failure {
    match e {
        SolverError::Dnl(e) => dnl_err(e),
        _ => Failure::invalid(e),
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Starts from `--config` when given, then applies the explicit flags.
fn run_config(run: &RunArgs, sub: &str) -> Result<RunConfig, Failure> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::load(path).map_err(input_err)?,
        None => {
            let network = run
                .network
                .clone()
                .ok_or_else(|| usage(sub, "--network is required unless --config is given"))?;
            let (Some(horizon_s), Some(dt_s)) = (run.horizon, run.dt) else {
                return Err(usage(sub, "--dt and --horizon are required unless --config is given"));
            };
            RunConfig {
                network,
                paths: None,
                auto_paths: None,
                demand: None,
                departures: None,
                out: None,
                junction_model: FifoPriority.name().to_string(),
                grid: GridConfig {
                    t0_s: 0.0,
                    horizon_s,
                    dt_s,
                },
                solver: Default::default(),
                penalty: Default::default(),
            }
        }
    };
    if let Some(p) = &run.network {
        cfg.network = p.clone();
    }
    if let Some(p) = &run.paths {
        cfg.paths = Some(p.clone());
        cfg.auto_paths = None;
    }
    if let Some(p) = &run.out {
        cfg.out = Some(p.clone());
    }
    if let Some(m) = &run.junction_model {
        cfg.junction_model = m.clone();
    }
    if let Some(dt) = run.dt {
        cfg.grid.dt_s = dt;
    }
    if let Some(h) = run.horizon {
        cfg.grid.horizon_s = h;
    }
    if let Some(t0) = run.t0 {
        cfg.grid.t0_s = t0;
    }
    Ok(cfg)
}

fn build_network(links_file: &Path, paths: &[RawPath], ods: &[RawOd]) -> Result<(Network, Vec<RawLink>), Failure> {
    let (nodes, links) = io::load_network(links_file).map_err(input_err)?;
    let net = validate_network(&nodes, &links, paths, ods).map_err(Failure::invalid)?;
    Ok((net, links))
}

pub fn dnl(args: DnlArgs) -> Result<(), Failure> {
    let mut cfg = run_config(&args.run, "dnl")?;
    if let Some(p) = args.departures {
        cfg.departures = Some(p);
    }
    let departures = cfg.departures.clone().ok_or_else(|| usage("dnl", "--departures is required"))?;
    let paths_file = cfg.paths.clone().ok_or_else(|| usage("dnl", "--paths is required"))?;
    let out = cfg.out.clone().ok_or_else(|| usage("dnl", "--out is required"))?;

    let grid = cfg.grid.grid().map_err(input_err)?;
    let model = model_by_name(&cfg.junction_model).map_err(Failure::invalid)?;
    let raw_paths = io::load_paths(&paths_file).map_err(input_err)?;
    let ods = match &cfg.demand {
        Some(p) => io::load_demand(p).map_err(input_err)?,
        None => Vec::new(),
    };
    let (net, _) = build_network(&cfg.network, &raw_paths, &ods)?;
    let ids: Vec<PathId> = net.paths.iter().map(|p| p.id).collect();
    let h = io::load_departures(&departures, &ids, grid.n_steps).map_err(input_err)?;

    let result = run_dnl(&net, &h, &grid, model.as_ref()).map_err(dnl_err)?;
    warn_all(&result.warnings);
    io::write_dnl_outputs(&out, &net, &result).map_err(Failure::runtime)?;
    let s = io::DnlSummary::new(&net, &result);
    println!(
        "links {}  paths {}  steps {}  departed {:.3} veh  arrived {:.3} veh",
        s.links, s.paths, s.steps, s.departed_veh, s.arrived_veh
    );
    println!("wrote {}", out.display());
    Ok(())
}

pub fn due(args: DueArgs) -> Result<(), Failure> {
    let mut cfg = run_config(&args.run, "due")?;
    if let Some(p) = args.demand {
        cfg.demand = Some(p);
    }
    if let Some(k) = args.auto_paths {
        cfg.auto_paths = Some(k as usize);
        cfg.paths = None;
    }
    let s = &mut cfg.solver;
    if let Some(a) = args.alpha {
        s.alpha = a;
    }
    if let Some(e) = args.epsilon {
        s.epsilon = e;
    }
    if let Some(n) = args.max_iters {
        s.max_iters = n as usize;
    }
    if let Some(b) = args.br_tolerance {
        s.br_tolerance = b;
    }
    if let Some(w) = args.early_weight {
        cfg.penalty.early_weight = w;
    }
    if let Some(w) = args.late_weight {
        cfg.penalty.late_weight = w;
    }
    let demand = cfg.demand.clone().ok_or_else(|| usage("due", "--demand is required"))?;
    let out = cfg.out.clone().ok_or_else(|| usage("due", "--out is required"))?;

    let grid = cfg.grid.grid().map_err(input_err)?;
    let model = model_by_name(&cfg.junction_model).map_err(Failure::invalid)?;
    cfg.solver.validate().map_err(Failure::invalid)?;
    let ods = io::load_demand(&demand).map_err(input_err)?;
    let (raw_paths, generated) = match (&cfg.paths, cfg.auto_paths) {
        (Some(p), _) => (io::load_paths(p).map_err(input_err)?, false),
        (None, Some(k)) => {
            let (_, links) = io::load_network(&cfg.network).map_err(input_err)?;
            let pairs: Vec<(NodeId, NodeId)> = ods.iter().map(|o| (o.origin, o.destination)).collect();
            (io::enumerate_paths(&links, &pairs, k).map_err(input_err)?, true)
        }
        (None, None) => return Err(usage("due", "--paths or --auto-paths is required")),
    };
    let (net, _) = build_network(&cfg.network, &raw_paths, &ods)?;

    let report = solve_due(&net, &grid, &cfg.solver, &cfg.penalty, model.as_ref()).map_err(solver_err)?;
    for (i, g) in report.relative_gap_history.iter().enumerate() {
        println!("iteration {:>4}  log10 relative gap {:>9.4}", i + 1, g.log10());
    }
    warn_all(&report.warnings);
    io::write_due_outputs(&out, &net, &report, &cfg.solver).map_err(Failure::runtime)?;
    if generated {
        io::write_paths(&out.join("paths.toml"), &raw_paths).map_err(Failure::runtime)?;
    }

    let status = if report.converged { "CONVERGED" } else { "NOT-CONVERGED" };
    println!("{status} after {} iterations", report.iterations_used);
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "origin", "destination", "gap_s", "min_cost_s", "relative");
    for g in &report.od_gaps {
        let rel = if g.min_cost_s > 0.0 { g.gap_s / g.min_cost_s } else { 0.0 };
        println!(
            "{:>8} {:>12} {:>12.4} {:>12.4} {:>12.6}",
            g.origin, g.destination, g.gap_s, g.min_cost_s, rel
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn paths(args: PathsArgs) -> Result<(), Failure> {
    let (_, links) = io::load_network(&args.network).map_err(input_err)?;
    let ods = io::load_demand(&args.demand).map_err(input_err)?;
    let pairs: Vec<(NodeId, NodeId)> = ods.iter().map(|o| (o.origin, o.destination)).collect();
    let paths = io::enumerate_paths(&links, &pairs, args.k as usize).map_err(input_err)?;
    match &args.out {
        Some(p) => {
            io::write_paths(p, &paths).map_err(Failure::runtime)?;
            println!("{} paths written to {}", paths.len(), p.display());
        }
        None => print!("{}", io::paths_to_toml(&paths)),
    }
    Ok(())
}
