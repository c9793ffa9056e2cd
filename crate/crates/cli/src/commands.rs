use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use trec::completeness::{
    completeness_test, generator_preserving_basis, predictability_test, remaining_kernel,
    velocity_kernel_dim, CompletenessVerdict,
};
use trec::dotlab::{build_dot, make_twin, DotSpec};
use trec::fcs::{cumulants_analytic, cumulants_fd, CumulantReport, StationaryData};
use trec::model::{load_network, serialize_network};
use trec::records::{entropy_production, record_interval, stationary_transition_totals, EntropyReport};
use trec::spectral::{stationary_state_with_tol, StationaryState};
use trec::trajsim::{empirical_cumulants, occupation_fractions, simulate, simulate_dump, Horizon, Initial, SimConfig};
use trec::{ChannelNetwork, Error};

use crate::report::{matrix, named, num, nums, vector, Report, ANALYTIC, CLOSED_FORM, EXACT};

pub fn load(path: &Path) -> Result<ChannelNetwork> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_network(&text).context("network")
}

fn model_section(net: &ChannelNetwork, source: &Path) -> Value {
    let (e, e0) = net.channel_counts();
    json!({
        "source": source.display().to_string(),
        "states": net.states(),
        "records": net.records(),
        "n_states": net.n_states(),
        "n_channels": e,
        "n_transitions": e0,
    })
}

fn stationary(net: &ChannelNetwork, tol: f64) -> Result<StationaryState> {
    stationary_state_with_tol(&net.generator(), tol).context("spectral")
}

fn stationary_section(ss: &StationaryState) -> Value {
    json!({"method": EXACT, "p": nums(&ss.p), "ergodic": ss.ergodic})
}

fn cumulant_section(r: &CumulantReport) -> Value {
    let mut v = json!({
        "method": r.method.as_str(),
        "records": r.records,
        "means": named(&r.records, &r.means),
        "noise": matrix(&r.noise),
        "fano": named(&r.records, &r.fano()),
    });
    if let Some(se) = &r.mean_errors {
        v["mean_errors"] = named(&r.records, se);
    }
    if let Some(se) = &r.noise_errors {
        v["noise_errors"] = matrix(se);
    }
    v
}

fn verdict_section(v: &CompletenessVerdict, names: &[String], tol: f64) -> Value {
    json!({
        "method": EXACT,
        "complete": v.complete,
        "lost_rank": v.lost_rank,
        "tolerance": tol,
        "threshold": num(v.threshold),
        "witness": v.witness.as_ref().map(vector),
        "witness_response": v.witness_response.as_ref().map(|r| named(names, r.as_slice())),
    })
}

fn entropy_section(net: &ChannelNetwork, ep: &EntropyReport) -> Value {
    json!({
        "method": ANALYTIC,
        "resolved": num(ep.resolved),
        "coarse": num(ep.coarse),
        "resolved_divergence": ep.resolved_divergence.as_ref().map(|d| json!({
            "reservoir": d.reservoir,
            "filter": d.filter,
            "from": net.states()[d.from],
            "to": net.states()[d.to],
        })),
        "coarse_divergence": ep.coarse_divergence.map(|(m, k)| json!([net.states()[m], net.states()[k]])),
        "note": ep.note,
    })
}

fn entropy_or_note(net: &ChannelNetwork, p: &[f64]) -> Result<Value> {
    match entropy_production(net, p) {
        Ok(ep) => Ok(entropy_section(net, &ep)),
        Err(e @ Error::UnpairedChannel { .. }) => Ok(json!({"method": ANALYTIC, "unavailable": e.to_string()})),
        Err(e) => Err(e).context("records"),
    }
}

fn record_names(net: &ChannelNetwork, selected: Option<&[String]>) -> Vec<String> {
    match selected {
        Some(s) => s.to_vec(),
        None => net.records().to_vec(),
    }
}

pub struct AnalyzeArgs<'a> {
    pub model: &'a Path,
    pub records: Option<&'a [String]>,
    pub tol: f64,
    pub fd: bool,
    pub fd_step: f64,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<Value> {
    let net = load(a.model)?;
    let mut r = Report::new("analyze");
    r.insert("model", model_section(&net, a.model));
    r.insert("tolerances", json!({"rank": a.tol, "fd_step": if a.fd { num(a.fd_step) } else { Value::Null }}));
    r.insert("generator", json!({"method": EXACT, "matrix": matrix(net.generator().matrix())}));

    let ss = stationary(&net, a.tol)?;
    r.insert("stationary", stationary_section(&ss));

    let mut cumulants = vec![cumulant_section(&cumulants_analytic(&net).context("fcs")?)];
    if a.fd {
        cumulants.push(cumulant_section(&cumulants_fd(&net, a.fd_step).context("fcs")?));
    }
    r.insert("cumulants", Value::Array(cumulants));

    let (e, e0) = net.channel_counts();
    let names = record_names(&net, a.records);
    let d = net.record_map(&names).context("network")?;
    let verdict = completeness_test(&net, &d, a.tol).context("completeness")?;
    let mut per_record = serde_json::Map::new();
    for name in &names {
        let single = net.record_map(std::slice::from_ref(name)).context("network")?;
        let v = completeness_test(&net, &single, a.tol).context("completeness")?;
        per_record.insert(name.clone(), json!(v.complete));
    }
    r.insert(
        "kernel",
        json!({
            "method": EXACT,
            "channels": e,
            "transitions": e0,
            "dim_ker_p": generator_preserving_basis(&net, a.tol).dim(),
            "dim_ker_bp": velocity_kernel_dim(&net, a.tol),
            "tolerance": a.tol,
        }),
    );
    let mut completeness = verdict_section(&verdict, &names, a.tol);
    completeness["records"] = json!(names);
    completeness["per_record"] = Value::Object(per_record);
    r.insert("completeness", completeness);
    r.insert("entropy", entropy_or_note(&net, &ss.p)?);
    Ok(r.into_value())
}

pub fn diagnose(model: &Path, measured: &[String], targets: &[String], tol: f64) -> Result<Value> {
    let net = load(model)?;
    let mut r = Report::new("diagnose");
    r.insert("model", model_section(&net, model));
    r.insert("tolerances", json!({"rank": tol}));
    let meas = net.record_map(measured).context("network")?;
    let rem = remaining_kernel(&net, &meas, tol).context("completeness")?;
    r.insert(
        "remaining_kernel",
        json!({
            "method": EXACT,
            "measured": measured,
            "dim": rem.dim(),
            "basis": (0..rem.dim()).map(|k| vector(&rem.vector(k))).collect::<Vec<_>>(),
        }),
    );
    let mut verdicts = Vec::new();
    for t in targets {
        let td = net.record_map(std::slice::from_ref(t)).context("network")?;
        let v = predictability_test(&net, &meas, &td, tol).context("completeness")?;
        let mut s = verdict_section(&v, std::slice::from_ref(t), tol);
        s["target"] = json!(t);
        s["predictable"] = json!(v.complete);
        verdicts.push(s);
    }
    r.insert("targets", Value::Array(verdicts));
    Ok(r.into_value())
}

pub enum TotalsSource<'a> {
    Stationary,
    File(&'a Path),
}

pub fn bounds(model: &Path, direction: &[(String, f64)], u_source: TotalsSource, tol: f64) -> Result<Value> {
    let net = load(model)?;
    if direction.is_empty() {
        bail!("bounds: at least one --direction record=weight is required");
    }
    let mut r = Report::new("bounds");
    r.insert("model", model_section(&net, model));
    r.insert("tolerances", json!({"rank": tol}));
    let (u, source) = match u_source {
        TotalsSource::Stationary => (stationary_transition_totals(&net).context("records")?, "stationary".to_string()),
        TotalsSource::File(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let u: Vec<f64> = serde_json::from_str(&text)
                .with_context(|| format!("{}: expected a JSON array of transition totals", p.display()))?;
            (u, p.display().to_string())
        }
    };
    let iv = record_interval(&net, &u, direction).context("records")?;
    let pp = net.projection();
    r.insert(
        "totals",
        json!({
            "source": source,
            "transitions": pp.transitions.iter().map(|t| json!([net.states()[t.from], net.states()[t.to]])).collect::<Vec<_>>(),
            "u": nums(&u),
        }),
    );
    let transitions: Vec<Value> = iv
        .transitions
        .iter()
        .map(|t| {
            json!({
                "from": net.states()[t.from],
                "to": net.states()[t.to],
                "u": num(t.u),
                "lo": num(t.lo),
                "hi": num(t.hi),
                "min_channel": t.min_channel,
                "max_channel": t.max_channel,
            })
        })
        .collect();
    r.insert(
        "interval",
        json!({
            "method": EXACT,
            "direction": direction.iter().map(|(k, w)| json!([k, w])).collect::<Vec<_>>(),
            "lo": num(iv.lo),
            "hi": num(iv.hi),
            "width": num(iv.width()),
            "transitions": transitions,
        }),
    );

    // the model's own stationary value, when it has one
    let reference = match StationaryData::new(&net) {
        Ok(data) => {
            let j = trec::fcs::mean_currents_at(&net, &data.stationary);
            let mut value = 0.0;
            for (name, w) in direction {
                value += w * j[net.record_index(name).context("network")?];
            }
            json!({"method": ANALYTIC, "value": num(value), "inside": iv.contains(value, tol * iv.width().abs().max(1.0))})
        }
        Err(e) => json!({"method": ANALYTIC, "unavailable": e.to_string()}),
    };
    r.insert("model_value", reference);
    Ok(r.into_value())
}

pub struct TwinArgs {
    pub eta: f64,
    pub eps: f64,
    pub mu_l: f64,
    pub mu_r: f64,
    pub temperature: f64,
    pub gamma: f64,
}

fn pick(s: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| s[(idx[i], idx[j])])
}

/// Builds the two-terminal dot and its twin, then checks the generator,
/// stationary state and mean total-heat difference. Returns the report and
/// the list of failed checks.
pub fn twin_demo(a: &TwinArgs) -> Result<(Value, Vec<String>)> {
    let spec = DotSpec::two_terminal(a.eps, a.mu_l, a.mu_r, a.temperature, a.gamma);
    let net = build_dot(&spec).context("dotlab")?;
    let twin = make_twin(&net, 0, "L", "R", a.eta).context("dotlab")?;
    let mut r = Report::new("twin-demo");
    r.insert(
        "parameters",
        json!({"eta": a.eta, "eps": a.eps, "mu_L": a.mu_l, "mu_R": a.mu_r, "temperature": a.temperature, "gamma": a.gamma}),
    );
    r.insert("rates", json!({"device": nums(&net.rates()), "twin": nums(&twin.rates())}));

    let generators_equal = net.generator() == twin.generator();
    let da = StationaryData::new(&net).context("spectral")?;
    let db = StationaryData::new(&twin).context("spectral")?;
    let p_diff = (da.stationary.as_vector() - db.stationary.as_vector()).amax();
    let r_diff = (&da.drazin.r - &db.drazin.r).amax();

    let ca = cumulants_analytic(&net).context("fcs")?;
    let cb = cumulants_analytic(&twin).context("fcs")?;
    let k = net.record_index("heat_total").context("network")?;
    let heats = [net.record_index("heat_L").context("network")?, net.record_index("heat_R").context("network")?];
    let heat_diff = cb.means[k] - ca.means[k];
    let expected = a.eta * (a.mu_l - a.mu_r) * da.stationary.p[0];
    let noise_diff = (pick(&cb.noise, &heats) - pick(&ca.noise, &heats)).norm();
    let total_noise_diff = cb.noise[(k, k)] - ca.noise[(k, k)];

    let ea = entropy_production(&net, &da.stationary.p).context("records")?;
    let eb = entropy_production(&twin, &db.stationary.p).context("records")?;

    r.insert(
        "state_dynamics",
        json!({
            "method": EXACT,
            "generators_bitwise_equal": generators_equal,
            "stationary_max_difference": num(p_diff),
            "drazin_max_difference": num(r_diff),
            "stationary": nums(&da.stationary.p),
        }),
    );
    r.insert(
        "heat",
        json!({
            "method": ANALYTIC,
            "mean_total": {"device": num(ca.means[k]), "twin": num(cb.means[k]), "difference": num(heat_diff)},
            "noise_reservoirs": {"records": ["heat_L", "heat_R"], "device": matrix(&pick(&ca.noise, &heats)), "twin": matrix(&pick(&cb.noise, &heats)), "difference_norm": num(noise_diff)},
            "noise_total_difference": num(total_noise_diff),
        }),
    );
    r.insert("expected_heat_difference", json!({"method": CLOSED_FORM, "value": num(expected)}));
    r.insert(
        "entropy",
        json!({
            "method": ANALYTIC,
            "device": {"resolved": num(ea.resolved), "coarse": num(ea.coarse)},
            "twin": {"resolved": num(eb.resolved), "coarse": num(eb.coarse)},
            "resolved_difference": num(eb.resolved - ea.resolved),
            "coarse_difference": num(eb.coarse - ea.coarse),
        }),
    );

    let mut failed = Vec::new();
    if !generators_equal {
        failed.push("generators are not bitwise equal".to_string());
    }
    if p_diff > 1e-12 {
        failed.push(format!("stationary states differ by {p_diff:e}"));
    }
    if (heat_diff - expected).abs() > 1e-12 * expected.abs().max(1.0) {
        failed.push(format!("heat difference {heat_diff} != expected {expected}"));
    }
    r.insert("checks", json!({"passed": failed.is_empty(), "failed": failed}));
    Ok((r.into_value(), failed))
}

pub struct SimulateArgs<'a> {
    pub model: &'a Path,
    pub seed: u64,
    pub trajectories: usize,
    pub horizon: Horizon,
    pub burn_in: f64,
    /// Initial state name; stationary sampling when absent.
    pub initial: Option<&'a str>,
    pub dump: Option<&'a Path>,
    pub dump_index: usize,
    pub tol: f64,
}

pub fn simulate_cmd(a: &SimulateArgs) -> Result<Value> {
    let net = load(a.model)?;
    let mut cfg = SimConfig::new(a.horizon, a.trajectories, a.seed);
    cfg.burn_in = a.burn_in;
    if let Some(name) = a.initial {
        let k = net
            .state_index(name)
            .ok_or_else(|| anyhow::anyhow!("simulate: unknown initial state `{name}`"))?;
        cfg.initial = Initial::State(k);
    }
    let stats = simulate(&net, &cfg).context("trajsim")?;
    let mut r = Report::new("simulate");
    r.insert("model", model_section(&net, a.model));
    r.insert(
        "config",
        json!({
            "seed": a.seed,
            "trajectories": a.trajectories,
            "horizon": match a.horizon {
                Horizon::Time(t) => json!({"time": t}),
                Horizon::Jumps(n) => json!({"jumps": n}),
            },
            "burn_in": a.burn_in,
            "initial": a.initial.unwrap_or("stationary"),
            "rng": "ChaCha8, stream = trajectory index",
        }),
    );
    let absorbed: Vec<usize> = stats.iter().filter(|s| s.absorbed).map(|s| s.index).collect();
    r.insert(
        "trajectories",
        json!({
            "total_jumps": stats.iter().map(|s| s.jumps).sum::<u64>(),
            "total_time": num(stats.iter().map(|s| s.elapsed).sum()),
            "absorbed_count": absorbed.len(),
            "absorbed": absorbed,
        }),
    );
    let occupation = occupation_fractions(&stats);
    let mc = match empirical_cumulants(&net, &stats) {
        Ok(mc) => cumulant_section(&mc),
        Err(e @ Error::InvalidArgument(_)) => {
            // unequal horizons: report means only
            let total: f64 = stats.iter().map(|s| s.elapsed).sum();
            let means: Vec<f64> = (0..net.n_records())
                .map(|m| stats.iter().map(|s| s.record_totals[m]).sum::<f64>() / total)
                .collect();
            json!({"method": "monte_carlo", "records": net.records(), "means": named(net.records(), &means), "noise": Value::Null, "note": e.to_string()})
        }
        Err(e) => return Err(e).context("trajsim"),
    };
    r.insert("monte_carlo", mc);
    let (analytic, p) = match stationary_state_with_tol(&net.generator(), a.tol).and_then(|ss| {
        let c = cumulants_analytic(&net)?;
        Ok((c, ss.p))
    }) {
        Ok((c, p)) => (cumulant_section(&c), Some(p)),
        Err(e) => (json!({"method": ANALYTIC, "unavailable": e.to_string()}), None),
    };
    r.insert("analytic", analytic);
    r.insert(
        "occupation",
        json!({
            "method": "monte_carlo",
            "fractions": nums(&occupation),
            "stationary": p.as_deref().map(nums),
        }),
    );
    if let Some(path) = a.dump {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        let s = simulate_dump(&net, &cfg, a.dump_index, &mut w).context("trajsim")?;
        r.insert(
            "dump",
            json!({"path": path.display().to_string(), "trajectory": a.dump_index, "jumps": s.jumps, "format": "time, channel, state_after"}),
        );
    }
    Ok(r.into_value())
}

/// Explicit-channel model file for a two-terminal dot, optionally the twin.
pub fn dot_model(a: &TwinArgs, twin: bool) -> Result<String> {
    let spec = DotSpec::two_terminal(a.eps, a.mu_l, a.mu_r, a.temperature, a.gamma);
    let mut net = build_dot(&spec).context("dotlab")?;
    if twin {
        net = make_twin(&net, 0, "L", "R", a.eta).context("dotlab")?;
    }
    Ok(serialize_network(&net))
}
