use std::f64::consts::TAU;

use cf_extremal::factorize::{fejer_riesz_z, sqrt_zm};
use cf_extremal::lca::{
    enumerate_omega, extremal_zm, lift_witness, reduce, restrict, solve_group, Factor, FiniteGroup, GroupDescriptor,
    GroupElement, OmegaDescriptor, Order,
};
use cf_extremal::seq::{is_pd_z, is_pd_zm, Sequence, SupportZ};
use cf_extremal::solver_z::{
    cf_z, cf_z_checked, classic_row, grid_sequence, lambda_candidates, lambda_summary, sparse_family_cf,
    verify_duality_z,
};
use cf_extremal::solver_zm::{brute_group_oracle, solve_zm, verify_duality_zm, Mode, SolveReport, ORACLE_MAX_ORDER};
use cf_extremal::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::input;
use crate::output::{cell, half_cell, value, Table};
use crate::{Cli, Command, GroupInput, OracleInput, Outcome, RunConfig, SupportInput};

/// Slack on the universal bounds `½ ≤ value ≤ 1`.
const BOUND_SLACK: f64 = 1e-9;
/// Exchange against grid in the classical table.
const CLASSIC_AGREEMENT: f64 = 1e-6;
/// Distance to the closed forms for truncated problems on `ℤ`.
const TRUNCATION_TOL: f64 = 5e-3;
const ORACLE_TOL: f64 = 1e-7;
const WITNESS_TOL: f64 = 1e-9;

pub const THREADS_VAR: &str = "CF_EXTREMAL_THREADS";

pub fn thread_pool() -> std::result::Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {v:?}"))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn outcome(json: Value, table: Option<Table>, failed: bool) -> Outcome {
    Outcome { json, table, failed }
}

/// Appends fields after the serialized ones.
fn extend(v: Value, extra: Value) -> Value {
    match (v, extra) {
        (Value::Object(mut a), Value::Object(b)) => {
            a.extend(b);
            Value::Object(a)
        }
        (v, _) => v,
    }
}

fn within_bounds(v: f64) -> bool {
    (0.5 - BOUND_SLACK..=1.0 + BOUND_SLACK).contains(&v)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let run = &cli.run;
    match &cli.command {
        Command::CheckPd(seq) => check_pd(run, seq),
        Command::Factor { seq, phases } => factor(run, seq, phases.as_deref()),
        Command::Solve { support, complex, no_check, max_m } => solve(run, support, *complex, !*no_check, *max_m),
        Command::Reduce(p) => reduce_cmd(p),
        Command::SolveGroup { problem, complex } => solve_group_cmd(run, problem, *complex),
        Command::Duality { support, universes } => duality(run, support, universes),
        Command::ClassicTable { n, grid_m } => classic_table(run, n, *grid_m),
        Command::SparseFamily { n, truncation } => sparse_family(run, *n, truncation.unwrap_or(10 * n)),
        Command::Lambda { n, universe } => lambda(run, *n, *universe),
        Command::Convergence { supports, max_m } => convergence(run, supports, *max_m),
        Command::OracleCompare { problem, complex, random, max_order } => match random {
            Some(count) => oracle_suite(run, *count, *max_order),
            None => oracle_compare(run, problem, *complex),
        },
    }
}

fn sequence(seq: &crate::SequenceInput) -> Result<Sequence> {
    input::sequence(seq.input.as_deref(), seq.json.as_deref(), seq.z_entries.as_deref(), seq.zm_values.as_deref())
}

fn check_pd(run: &RunConfig, seq: &crate::SequenceInput) -> Result<Outcome> {
    let cert = match sequence(seq)? {
        Sequence::Z(s) => is_pd_z(&s, run.tol),
        Sequence::Zm(s) => is_pd_zm(&s, run.tol),
    };
    Ok(outcome(value(&cert), None, false))
}

fn factor(run: &RunConfig, seq: &crate::SequenceInput, phases: Option<&str>) -> Result<Outcome> {
    match sequence(seq)? {
        Sequence::Z(s) => {
            if phases.is_some() {
                return Err(usage("--phases applies to sequences on ℤ_m"));
            }
            Ok(outcome(value(&fejer_riesz_z(&s, run.tol)?), None, false))
        }
        Sequence::Zm(s) => {
            let m = s.modulus() as usize;
            let phases: Vec<f64> = match (phases, run.seed) {
                (Some(p), None) => input::parse_list(p, "a phase")?,
                (None, Some(seed)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..m).map(|_| rng.gen_range(0.0..TAU)).collect()
                }
                (None, None) => vec![0.0; m],
                (Some(_), Some(_)) => return Err(usage("give --phases or --seed, not both")),
            };
            if phases.len() != m {
                return Err(usage(format!("{} phases given for modulus {m}", phases.len())));
            }
            let f = sqrt_zm(&s, &phases, run.tol)?;
            Ok(outcome(extend(value(&f), json!({ "seed": run.seed })), None, false))
        }
    }
}

enum Domain {
    Zm,
    Z,
}

fn domain(s: &SupportInput) -> Result<Domain> {
    match (s.zm, s.z) {
        (true, false) => Ok(Domain::Zm),
        (false, true) => Ok(Domain::Z),
        _ => Err(usage("choose the domain with --zm or --z")),
    }
}

fn bounds_json(report: &SolveReport) -> (Value, bool) {
    let ok = within_bounds(report.value);
    (json!({ "bounds": { "lower": 0.5, "upper": 1.0, "passed": ok } }), !ok)
}

fn solve(run: &RunConfig, s: &SupportInput, complex: bool, check: bool, max_m: u64) -> Result<Outcome> {
    let support = s.support.as_deref();
    let file = s.support_file.as_deref();
    match domain(s)? {
        Domain::Zm => {
            let h = input::support_zm(s.modulus, support, file)?;
            let mode = if complex { Mode::Complex } else { Mode::Real };
            let report = solve_zm(&h, mode, run.tol)?;
            let (bounds, failed) = bounds_json(&report);
            let extra = extend(json!({ "support": value(&h), "mode": value(&mode) }), bounds);
            Ok(outcome(extend(value(&report), extra), None, failed))
        }
        Domain::Z => {
            if s.modulus.is_some() {
                return Err(usage("-m applies to ℤ_m"));
            }
            let h = input::support_z(support, file)?;
            let (json, report) = if check {
                let checked = cf_z_checked(&h, run.tol, max_m)?;
                (value(&checked), checked.report)
            } else {
                let report = cf_z(&h, run.tol)?;
                (value(&report), report)
            };
            let (bounds, failed) = bounds_json(&report);
            Ok(outcome(extend(json, extend(json!({ "support": value(&h) }), bounds)), None, failed))
        }
    }
}

fn group_problem(p: &GroupInput) -> Result<input::GroupProblem> {
    input::group_problem(&p.group, &p.z, p.omega.as_deref(), p.omega_file.as_deref())
}

fn reduce_cmd(p: &GroupInput) -> Result<Outcome> {
    let g = group_problem(p)?;
    Ok(outcome(value(&reduce(&g.group, &g.omega, &g.z, p.bound)?), None, false))
}

fn solve_group_cmd(run: &RunConfig, p: &GroupInput, complex: bool) -> Result<Outcome> {
    let g = group_problem(p)?;
    let mode = if complex { Mode::Complex } else { Mode::Real };
    let report = solve_group(&g.group, &g.omega, &g.z, mode, run.tol, p.bound)?;
    let (bounds, mut failed) = bounds_json(&report.report);
    let order_two = matches!(report.reduced.order, Order::Finite(2));
    let one = !order_two || (report.report.value - 1.0).abs() <= BOUND_SLACK;
    failed |= !one;
    let extra = extend(bounds, json!({ "order_two": { "applies": order_two, "passed": one } }));
    Ok(outcome(extend(value(&report), extra), None, failed))
}

fn duality(run: &RunConfig, s: &SupportInput, universes: &str) -> Result<Outcome> {
    let support = s.support.as_deref();
    let file = s.support_file.as_deref();
    match domain(s)? {
        Domain::Zm => {
            let h = input::support_zm(s.modulus, support, file)?;
            let report = verify_duality_zm(&h, run.tol)?;
            let failed = !report.passed;
            Ok(outcome(value(&report), None, failed))
        }
        Domain::Z => {
            let h = input::support_z(support, file)?;
            let universes = input::parse_list::<u64>(universes, "a universe bound")?;
            let trend = verify_duality_z(&h, &universes, run.tol)?;
            let passed = trend.deviation <= TRUNCATION_TOL;
            let mut table = Table::new(vec!["universe", "m", "m_dual", "product"]);
            for s in &trend.steps {
                table.push(vec![s.universe.to_string(), cell(s.m), cell(s.m_dual), cell(s.product)]);
            }
            let extra = json!({ "tolerance": TRUNCATION_TOL, "passed": passed });
            Ok(outcome(extend(value(&trend), extra), Some(table), !passed))
        }
    }
}

fn classic_table(run: &RunConfig, n: &str, grid_m: u64) -> Result<Outcome> {
    let range = input::range(n)?;
    if *range.start() == 0 {
        return Err(usage("n starts at 1"));
    }
    let rows = range.collect::<Vec<_>>().into_par_iter().map(|n| classic_row(n, grid_m, run.tol)).collect::<Result<Vec<_>>>()?;
    let analytic = rows.iter().find(|r| r.n == 1).map(|r| (r.exchange - 1.0).abs() <= BOUND_SLACK);
    let agreement = rows.iter().map(|r| (r.exchange - r.grid).abs()).fold(0.0_f64, f64::max);
    let failed = analytic == Some(false) || agreement > CLASSIC_AGREEMENT;
    let mut table = Table::new(vec![
        "n",
        "exchange",
        "grid",
        "grid_m",
        "printed_formula",
        "classical_formula",
        "delta_printed",
        "delta_classical",
    ]);
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            cell(r.exchange),
            cell(r.grid),
            r.grid_m.to_string(),
            cell(r.printed_formula),
            cell(r.classical_formula),
            cell(r.delta_printed),
            cell(r.delta_classical),
        ]);
    }
    let json = json!({
        "rows": value(&rows),
        "checks": {
            "n1_equals_one": analytic,
            "max_exchange_grid_gap": agreement,
            "agreement_tolerance": CLASSIC_AGREEMENT,
            "passed": !failed,
        },
    });
    Ok(outcome(json, Some(table), failed))
}

fn sparse_family(run: &RunConfig, n: u64, m: u64) -> Result<Outcome> {
    let report = sparse_family_cf(n, m, run.tol)?;
    let gap = (report.value - report.formula).abs();
    let passed = gap <= TRUNCATION_TOL;
    let mut table = Table::new(vec!["truncation", "value"]);
    for (cut, v) in &report.trend {
        table.push(vec![cut.to_string(), cell(*v)]);
    }
    let extra = json!({ "formula_gap": gap, "tolerance": TRUNCATION_TOL, "passed": passed });
    Ok(outcome(extend(value(&report), extra), Some(table), !passed))
}

fn lambda(run: &RunConfig, n: u64, u: u64) -> Result<Outcome> {
    let values = lambda_candidates(n, u)?
        .into_par_iter()
        .map(|h| cf_z(&h, run.tol).map(|r| (h, r.value)))
        .collect::<Result<Vec<_>>>()?;
    let report = lambda_summary(n, u, values)?;
    let passed = report.upper_bound_margin <= BOUND_SLACK;
    let mut table = Table::new(vec!["support", "value"]);
    for (h, v) in &report.values {
        table.push(vec![half_cell(h.half()), cell(*v)]);
    }
    let bound = 1.0 - 0.5 / ((n + 1) * (n + 1)) as f64;
    let extra = json!({ "upper_bound": bound, "passed": passed });
    Ok(outcome(extend(value(&report), extra), Some(table), !passed))
}

fn convergence(run: &RunConfig, supports: &[String], max_m: u64) -> Result<Outcome> {
    let supports = supports.iter().map(|s| input::support_z(Some(s), None)).collect::<Result<Vec<SupportZ>>>()?;
    let runs = supports
        .par_iter()
        .map(|h| {
            let (sequence, converged) = grid_sequence(h, run.tol, max_m)?;
            let exchange = cf_z(h, run.tol)?.value;
            Ok((sequence, converged, exchange))
        })
        .collect::<Result<Vec<_>>>()?;
    let limit_tol = 3.0 * run.tol;
    let mut failed = false;
    let mut table = Table::new(vec!["support", "m", "value", "exchange"]);
    let mut out = Vec::new();
    for (h, (sequence, converged, exchange)) in supports.iter().zip(runs) {
        let monotone = sequence.windows(2).all(|w| w[1].1 <= w[0].1 + run.tol);
        let gap = sequence.last().map(|p| (p.1 - exchange).abs()).unwrap_or(f64::NAN);
        let passed = monotone && (!converged || gap <= limit_tol);
        failed |= !passed;
        for (m, v) in &sequence {
            table.push(vec![half_cell(h.half()), m.to_string(), cell(*v), cell(exchange)]);
        }
        out.push(json!({
            "support": value(h),
            "grid_sequence": value(&sequence),
            "converged": converged,
            "exchange": exchange,
            "gap": gap,
            "monotone": monotone,
            "passed": passed,
        }));
    }
    Ok(outcome(json!({ "limit_tolerance": limit_tol, "runs": out }), Some(table), failed))
}

struct Comparison {
    reduced: f64,
    oracle: f64,
    witness_gap: f64,
    restrict_identity: bool,
}

impl Comparison {
    fn delta(&self) -> f64 {
        (self.reduced - self.oracle).abs()
    }

    fn passed(&self) -> bool {
        self.delta() <= ORACLE_TOL && self.witness_gap <= WITNESS_TOL && self.restrict_identity
    }

    fn json(&self, mode: Mode) -> Value {
        json!({
            "mode": value(&mode),
            "reduced": self.reduced,
            "oracle": self.oracle,
            "delta": self.delta(),
            "witness": { "f_z_gap": self.witness_gap, "restrict_identity": self.restrict_identity },
            "passed": self.passed(),
        })
    }
}

fn compare(
    descriptor: &GroupDescriptor,
    omega: &OmegaDescriptor,
    z: &GroupElement,
    group: &FiniteGroup,
    points: &[Vec<u64>],
    mode: Mode,
    tol: f64,
) -> Result<Comparison> {
    let zc = group.from_element(z)?;
    let reduced = solve_group(descriptor, omega, z, mode, tol, None)?;
    let (oracle, _) = brute_group_oracle(group, points, &zc, mode, tol)?;
    let psi = extremal_zm(&reduced.report).ok_or_else(|| usage("z must have finite order"))?;
    let f = lift_witness(psi, group, &zc, points)?;
    let witness_gap = (f.get(&zc).norm() - reduced.report.value).abs();
    let restrict_identity = restrict(&f, &zc)? == *psi;
    Ok(Comparison { reduced: reduced.report.value, oracle: oracle.value, witness_gap, restrict_identity })
}

fn oracle_compare(run: &RunConfig, p: &OracleInput, complex: bool) -> Result<Outcome> {
    let (Some(group), Some(z)) = (&p.group, &p.z) else {
        return Err(usage("oracle-compare needs --group and --z, or --random"));
    };
    let g = input::group_problem(group, z, p.omega.as_deref(), p.omega_file.as_deref())?;
    let fin = FiniteGroup::from_descriptor(&g.group)?;
    let points = enumerate_omega(&g.group, &g.omega)?;
    let mode = if complex { Mode::Complex } else { Mode::Real };
    let c = compare(&g.group, &g.omega, &g.z, &fin, &points, mode, run.tol)?;
    let failed = !c.passed();
    let extra = json!({ "group": g.group.to_string(), "z": g.z.to_string(), "omega_size": points.len() });
    Ok(outcome(extend(c.json(mode), extra), None, failed))
}

struct Instance {
    descriptor: GroupDescriptor,
    group: FiniteGroup,
    omega: OmegaDescriptor,
    points: Vec<Vec<u64>>,
    z: GroupElement,
}

fn element(descriptor: &GroupDescriptor, x: &[u64]) -> Result<GroupElement> {
    descriptor.parse_element(&x.iter().map(u64::to_string).collect::<Vec<_>>().join(","))
}

/// A product of up to three cyclic groups with a symmetric `Ω` holding some
/// multiples of `z` and a few unrelated points.
fn random_instance(rng: &mut ChaCha8Rng, max_order: u64) -> Result<Instance> {
    let moduli: Vec<u64> = loop {
        let factors = rng.gen_range(1..=3);
        let moduli: Vec<u64> = (0..factors).map(|_| rng.gen_range(2..=24)).collect();
        if moduli.iter().product::<u64>() <= max_order {
            break moduli;
        }
    };
    let group = FiniteGroup::new(moduli.clone())?;
    let descriptor = GroupDescriptor::new(moduli.iter().map(|m| Factor::Cyclic { m: *m }).collect())?;
    let z = loop {
        let z: Vec<u64> = moduli.iter().map(|m| rng.gen_range(0..*m)).collect();
        if z.iter().any(|c| *c != 0) {
            break z;
        }
    };
    let mut inside = vec![false; group.order() as usize];
    let mut mark = |x: &[u64]| {
        inside[group.index(x)] = true;
        inside[group.index(&group.neg(x))] = true;
    };
    mark(&vec![0; moduli.len()]);
    mark(&z);
    for k in 2..group.element_order(&z) {
        if rng.gen_bool(0.35) {
            mark(&group.scale(k as i64, &z));
        }
    }
    for _ in 0..rng.gen_range(0..=12) {
        let x: Vec<u64> = moduli.iter().map(|m| rng.gen_range(0..*m)).collect();
        mark(&x);
    }
    let points: Vec<Vec<u64>> = (0..group.order() as usize).filter(|i| inside[*i]).map(|i| group.element(i)).collect();
    let omega = OmegaDescriptor::Explicit(points.iter().map(|x| element(&descriptor, x)).collect::<Result<_>>()?);
    let z = element(&descriptor, &z)?;
    Ok(Instance { descriptor, group, omega, points, z })
}

fn oracle_suite(run: &RunConfig, count: usize, max_order: u64) -> Result<Outcome> {
    let seed = run.seed.ok_or_else(|| usage("--random needs an explicit --seed"))?;
    if !(2..=ORACLE_MAX_ORDER).contains(&max_order) {
        return Err(usage(format!("--max-order must lie in [2, {ORACLE_MAX_ORDER}]")));
    }
    eprintln!("cf-extremal: oracle suite with seed {seed}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..count).map(|_| random_instance(&mut rng, max_order)).collect::<Result<Vec<_>>>()?;
    let results = instances
        .par_iter()
        .map(|i| {
            [Mode::Real, Mode::Complex]
                .map(|mode| compare(&i.descriptor, &i.omega, &i.z, &i.group, &i.points, mode, run.tol).map(|c| (mode, c)))
                .into_iter()
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(vec!["instance", "group", "z", "mode", "reduced", "oracle", "delta"]);
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    let (mut max_delta, mut max_witness) = (0.0_f64, 0.0_f64);
    for (idx, (inst, res)) in instances.iter().zip(&results).enumerate() {
        let mut case = Map::new();
        case.insert("group".into(), json!(inst.descriptor.to_string()));
        case.insert("z".into(), json!(inst.z.to_string()));
        case.insert("omega_size".into(), json!(inst.points.len()));
        for (mode, c) in res {
            max_delta = max_delta.max(c.delta());
            max_witness = max_witness.max(c.witness_gap);
            if !c.passed() && failures.last() != Some(&idx) {
                failures.push(idx);
            }
            let tag = value(mode).as_str().unwrap_or_default().to_string();
            table.push(vec![
                idx.to_string(),
                inst.descriptor.to_string(),
                inst.z.to_string(),
                tag.clone(),
                cell(c.reduced),
                cell(c.oracle),
                cell(c.delta()),
            ]);
            case.insert(tag, c.json(*mode));
        }
        cases.push(Value::Object(case));
    }
    let json = json!({
        "seed": seed,
        "instances": count,
        "max_order": max_order,
        "max_delta": max_delta,
        "max_witness_gap": max_witness,
        "failures": failures,
        "passed": failures.is_empty(),
        "cases": cases,
    });
    let failed = !failures.is_empty();
    Ok(outcome(json, Some(table), failed))
}
