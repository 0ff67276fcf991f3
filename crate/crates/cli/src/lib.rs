//! Subcommands of the `tokencluster` binary, callable from tests.

pub mod export;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use tokencluster::sim::{Trace, TraceHeader};
use tokencluster::verifier::{self, Snapshot};
use tokencluster::{InvariantMonitor, RunConfig, Scenario, Simulator, Topology, Variant};

use export::ExportedClustering;

/// Exit codes shared by the subcommands.
pub mod exit {
    pub const OK: u8 = 0;
    /// Scenario, trace or argument error.
    pub const INPUT: u8 = 1;
    /// `run`: not legitimate at the horizon. `verify`: violations found.
    pub const NEGATIVE: u8 = 2;
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub m: Option<usize>,
    pub variant: Option<Variant>,
    /// Maximum number of events.
    pub horizon: Option<u64>,
    pub snapshot_every: Option<u64>,
    pub stop_when_legitimate: bool,
    pub export_dot: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub final_snapshot: Option<PathBuf>,
}

pub const DEFAULT_HORIZON: u64 = 10_000;

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Scenario>()
        .with_context(|| format!("{}", path.display()))
}

/// Applies the command-line overrides to the scenario header and validates it.
pub fn configure(mut sc: Scenario, opts: &RunOptions) -> Result<(Scenario, RunConfig)> {
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    if let Some(m) = opts.m {
        sc.m = m;
    }
    if let Some(v) = opts.variant {
        sc.variant = v;
    }
    sc.validate()?;
    let mut cfg = RunConfig::for_scenario(&sc);
    cfg.max_events = opts.horizon.unwrap_or(DEFAULT_HORIZON);
    cfg.stop_when_legitimate = opts.stop_when_legitimate;
    Ok((sc, cfg))
}

fn summary(snap: &Snapshot) -> String {
    let clusters = snap.clusters();
    let sizes: Vec<String> = clusters
        .iter()
        .map(|(c, nodes)| format!("{c}:{}", nodes.len()))
        .collect();
    let free = snap.states.values().filter(|s| s.col.is_free()).count();
    format!(
        "{} clusters [{}], {} free, {} tokens, {} in flight",
        clusters.len(),
        sizes.join(" "),
        free,
        snap.tokens().len(),
        snap.in_flight.len()
    )
}

pub fn cmd_run(scenario: &Path, opts: &RunOptions, out: &mut dyn Write) -> Result<u8> {
    let (sc, cfg) = match load_scenario(scenario).and_then(|sc| configure(sc, opts)) {
        Ok(x) => x,
        Err(e) => {
            writeln!(out, "error: {e:#}")?;
            return Ok(exit::INPUT);
        }
    };
    let m = cfg.m;
    let mut sim = Simulator::new(cfg, &sc)?;
    let mut trace_out = match &opts.trace {
        Some(p) => {
            let mut f = io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
            );
            writeln!(f, "{}", Trace::header_line(&sim.header()))?;
            Some(f)
        }
        None => None,
    };
    let every = opts.snapshot_every.filter(|&k| k > 0);
    let mut io_err = None;
    let outcome = sim.run(|rec, snap| {
        if let Some(f) = trace_out.as_mut() {
            if let Err(e) = writeln!(f, "{}", Trace::event_line(rec)) {
                io_err.get_or_insert(e);
            }
        }
        if every.is_some_and(|k| (rec.index + 1) % k == 0) {
            if let Err(e) = writeln!(
                out,
                "event {} at {}: {}",
                rec.index + 1,
                rec.time,
                summary(snap)
            ) {
                io_err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    if let Some(mut f) = trace_out {
        f.flush()?;
    }
    let snap = sim.snapshot();
    if let Some(p) = &opts.export_dot {
        fs::write(p, ExportedClustering::from_snapshot(snap).to_dot())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &opts.final_snapshot {
        fs::write(p, serde_json::to_string_pretty(snap)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    writeln!(
        out,
        "{} events, time {}, {} faults",
        outcome.events, outcome.time, outcome.faults
    )?;
    writeln!(out, "final: {}", summary(snap))?;
    match verifier::is_legitimate(snap, m) {
        Ok(()) => {
            writeln!(out, "legitimate")?;
            Ok(exit::OK)
        }
        Err(v) => {
            writeln!(out, "not converged: {v}")?;
            Ok(exit::NEGATIVE)
        }
    }
}

pub fn cmd_verify(trace: &Path, out: &mut dyn Write) -> Result<u8> {
    let parsed = fs::read_to_string(trace)
        .with_context(|| format!("reading {}", trace.display()))
        .and_then(|t| Trace::from_jsonl(&t).map_err(anyhow::Error::from));
    let trace = match parsed {
        Ok(t) => t,
        Err(e) => {
            writeln!(out, "error: {e:#}")?;
            return Ok(exit::INPUT);
        }
    };
    let TraceHeader { config, .. } = &trace.header;
    let mut monitor = InvariantMonitor::new(config.m, config.variant).tracking_correctness();
    let replayed = verifier::replay(&trace, |rec, snap| monitor.observe(rec, snap));
    let last = match replayed {
        Ok(s) => s,
        Err(e) => {
            writeln!(out, "error: {e}")?;
            return Ok(exit::INPUT);
        }
    };
    writeln!(
        out,
        "{} events replayed, {} handler faults",
        monitor.snapshots(),
        monitor.faults()
    )?;
    for w in monitor.not_correct_windows() {
        match w.end {
            Some(end) => writeln!(
                out,
                "not correct from event {} to event {} ({})",
                w.start, end, w.first
            )?,
            None => writeln!(
                out,
                "not correct from event {} to the end ({})",
                w.start, w.first
            )?,
        }
    }
    let legit = verifier::is_legitimate(&last, config.m);
    match &legit {
        Ok(()) => writeln!(out, "final configuration legitimate")?,
        Err(v) => writeln!(out, "final configuration not legitimate: {v}")?,
    }
    match monitor.violations().first() {
        None => {
            writeln!(out, "no invariant violations")?;
            Ok(exit::OK)
        }
        Some(v) => {
            writeln!(
                out,
                "{} invariant violations; first at event {}: {}: {}",
                monitor.violations().len(),
                v.index,
                v.invariant,
                v.detail
            )?;
            Ok(exit::NEGATIVE)
        }
    }
}

/// Runs seeds `first..first + count` in parallel; prints one line per seed
/// and a tally. Exits 0 when every seed converged.
pub fn cmd_batch(
    scenario: &Path,
    opts: &RunOptions,
    first: u64,
    count: u64,
    out: &mut dyn Write,
) -> Result<u8> {
    let (sc, cfg) = match load_scenario(scenario).and_then(|sc| configure(sc, opts)) {
        Ok(x) => x,
        Err(e) => {
            writeln!(out, "error: {e:#}")?;
            return Ok(exit::INPUT);
        }
    };
    let results: Vec<(u64, Result<u64, String>, bool)> = (first..first + count)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            cfg.stop_when_legitimate = true;
            let mut sim = Simulator::new(cfg, &sc).expect("validated");
            let mut monitor = InvariantMonitor::new(sc.m, sc.variant);
            let outcome = sim.run(|rec, snap| monitor.observe(rec, snap));
            let verdict = if outcome.legitimate {
                Ok(outcome.events)
            } else {
                Err(verifier::is_legitimate(sim.snapshot(), sc.m)
                    .err()
                    .map(|v| v.to_string())
                    .unwrap_or_default())
            };
            (seed, verdict, monitor.is_clean())
        })
        .collect();
    let mut converged = 0;
    let mut dirty = 0;
    for (seed, verdict, clean) in &results {
        let note = if *clean {
            ""
        } else {
            " (invariant violations)"
        };
        match verdict {
            Ok(events) => {
                converged += 1;
                writeln!(out, "seed {seed}: legitimate after {events} events{note}")?;
            }
            Err(v) => writeln!(out, "seed {seed}: not converged: {v}{note}")?,
        }
        dirty += usize::from(!clean);
    }
    writeln!(
        out,
        "{converged}/{count} converged, {dirty} runs with invariant violations"
    )?;
    Ok(if converged == count && dirty == 0 {
        exit::OK
    } else {
        exit::NEGATIVE
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Ring,
    Path,
    Complete,
    Star,
    Grid,
    Random,
}

/// Builds a scenario text for a generated topology. `n` is the node count
/// (the side for grids); `density` is the extra-edge probability of random
/// graphs, whose layout is drawn from `seed`.
pub fn cmd_gen(
    shape: Shape,
    n: u32,
    m: usize,
    variant: Variant,
    seed: u64,
    density: f64,
) -> Result<String> {
    use rand::SeedableRng;
    let topology = match shape {
        Shape::Ring => Topology::ring(n),
        Shape::Path => Topology::path(n),
        Shape::Complete => Topology::complete(n),
        Shape::Star => Topology::star(n),
        Shape::Grid => Topology::grid(n, n),
        Shape::Random => {
            anyhow::ensure!((0.0..=1.0).contains(&density), "density must lie in [0, 1]");
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Topology::random_connected(n, density, &mut rng)
        }
    };
    let sc = Scenario::new(m, variant, seed, topology);
    sc.validate()?;
    Ok(sc.to_text())
}
