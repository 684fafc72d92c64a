//! Parameter-sweep engine over (data rate, scheme, replica count, node count)
//! grids, evaluating the analytic model and optionally the Monte Carlo
//! simulator at every point.

use std::collections::BTreeSet;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::frame::{dbm_to_watts, DrId, Scenario};
use crate::scheme::SchemeKind;
use crate::sim;

/// One (scheme, r) pair of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemeR {
    pub scheme: SchemeKind,
    pub r: u32,
}

impl SchemeR {
    pub fn new(scheme: SchemeKind, r: u32) -> Self {
        SchemeR { scheme, r }
    }
}

/// Declarative sweep description; the JSON form uses exactly these keys.
/// Every field has a default, so `{}` is the standard comparison sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub dr_list: Vec<DrId>,
    pub scheme_r_list: Vec<SchemeR>,
    pub node_counts: Vec<u64>,
    pub lambda_per_hour: f64,
    pub interval_s: f64,
    pub payload_bytes: u32,
    pub runs_per_point: u64,
    pub seed: u64,
    pub simulate: bool,
    pub power_dbm: f64,
    pub delta_h_s: f64,
    pub delta_p_s: f64,
    pub delta_w_s: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            dr_list: vec![DrId::Dr8, DrId::Dr9],
            scheme_r_list: default_scheme_r_list(),
            node_counts: default_node_counts(),
            lambda_per_hour: 4.0,
            interval_s: 3600.0,
            payload_bytes: 15,
            runs_per_point: 10_000,
            seed: 0,
            simulate: false,
            power_dbm: 14.0,
            delta_h_s: 0.233,
            delta_p_s: 0.102,
            delta_w_s: 0.0,
        }
    }
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.dr_list.is_empty() || self.scheme_r_list.is_empty() || self.node_counts.is_empty()
        {
            return Err(Error::invalid(
                "dr_list, scheme_r_list, and node_counts must be non-empty",
            ));
        }
        if self.simulate && self.runs_per_point == 0 {
            return Err(Error::invalid(
                "runs_per_point must be at least 1 when simulate is set",
            ));
        }
        Ok(())
    }
}

/// Node-count axis: 16 log-spaced values over 10^2..10^6, wide enough to show
/// both the sparse-traffic and the congested regime of every scheme.
pub fn default_node_counts() -> Vec<u64> {
    vec![
        100, 185, 341, 631, 1166, 2154, 3981, 7356, 13594, 25119, 46416, 85770, 158489, 292864,
        541170, 1000000,
    ]
}

/// The standard comparison set: no replication plus both schemes at r = 2, 3.
pub fn default_scheme_r_list() -> Vec<SchemeR> {
    vec![
        SchemeR::new(SchemeKind::None, 1),
        SchemeR::new(SchemeKind::Frame, 2),
        SchemeR::new(SchemeKind::Frame, 3),
        SchemeR::new(SchemeKind::Fragment, 2),
        SchemeR::new(SchemeKind::Fragment, 3),
    ]
}

/// One sweep-point result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub dr: DrId,
    pub scheme: SchemeKind,
    pub r: u32,
    pub n_nodes: u64,
    pub lambda_per_hour: f64,
    pub mdp_analytic: f64,
    pub mdp_sim: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub ee_analytic: f64,
    pub toa_m_s: f64,
    /// Simulation runs behind `mdp_sim` (0 when the point was analytic only).
    pub runs: u64,
    /// Per-point seed derived from the spec seed and the point index.
    pub seed: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stable per-point seed so sweep results never depend on scheduling.
pub(crate) fn point_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

fn build_scenario(spec: &SweepSpec, dr: DrId, combo: SchemeR, n_nodes: u64) -> Result<Scenario> {
    Scenario::new(
        dr,
        n_nodes,
        spec.lambda_per_hour * spec.interval_s / 3600.0,
        spec.interval_s,
        spec.payload_bytes,
        combo.scheme,
        combo.r,
        dbm_to_watts(spec.power_dbm),
        spec.delta_h_s,
        spec.delta_p_s,
        spec.delta_w_s,
    )
}

/// Evaluate the whole grid. Analytic values are always computed; simulation
/// runs when `spec.simulate` is set. Records come back sorted by
/// (dr, scheme, r, n_nodes) and are bit-identical across repeated calls.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let mut drs = spec.dr_list.clone();
    drs.sort();
    drs.dedup();
    let mut combos = spec.scheme_r_list.clone();
    combos.sort();
    combos.dedup();
    let mut nodes = spec.node_counts.clone();
    nodes.sort_unstable();
    nodes.dedup();

    let mut points = Vec::with_capacity(drs.len() * combos.len() * nodes.len());
    for dr in &drs {
        for combo in &combos {
            for n in &nodes {
                points.push((*dr, *combo, *n));
            }
        }
    }

    points
        .par_iter()
        .enumerate()
        .map(|(index, &(dr, combo, n_nodes))| {
            let scenario = build_scenario(spec, dr, combo, n_nodes).map_err(|e| {
                Error::invalid(format!(
                    "sweep point ({dr}, {scheme}, r={r}, N={n_nodes}): {e}",
                    scheme = combo.scheme,
                    r = combo.r
                ))
            })?;
            let report = analytic::delivery_report(&scenario);
            let seed = point_seed(spec.seed, index as u64);
            let mut record = SweepRecord {
                dr,
                scheme: combo.scheme,
                r: combo.r,
                n_nodes,
                lambda_per_hour: spec.lambda_per_hour,
                mdp_analytic: report.mdp,
                mdp_sim: None,
                ci_low: None,
                ci_high: None,
                ee_analytic: report.ee,
                toa_m_s: report.toa_m,
                runs: 0,
                seed,
            };
            if spec.simulate {
                let est = sim::run_monte_carlo(&scenario, spec.runs_per_point, seed)?;
                record.mdp_sim = Some(est.mdp_hat);
                record.ci_low = Some(est.ci_low);
                record.ci_high = Some(est.ci_high);
                record.runs = est.runs;
            }
            Ok(record)
        })
        .collect()
}

/// Ranking metric for [`find_best_scheme`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mdp,
    Ee,
}

/// The (dr, scheme, r) combination with the best analytic metric at the given
/// node count. Ties break toward lower r, then lower data rate, then scheme
/// order, so the answer is reproducible and independent of record order.
pub fn find_best_scheme(
    records: &[SweepRecord],
    metric: Metric,
    n_nodes: u64,
) -> Result<(DrId, SchemeKind, u32)> {
    struct Candidate {
        value: f64,
        tie_key: (u32, u8, SchemeKind),
        combo: (DrId, SchemeKind, u32),
    }

    let combos: BTreeSet<(DrId, SchemeKind, u32)> =
        records.iter().map(|r| (r.dr, r.scheme, r.r)).collect();
    if combos.is_empty() {
        return Err(Error::IncompleteData("no records to rank".to_string()));
    }
    let mut best: Option<Candidate> = None;
    for &(dr, scheme, r) in &combos {
        let record = records
            .iter()
            .find(|rec| rec.dr == dr && rec.scheme == scheme && rec.r == r && rec.n_nodes == n_nodes)
            .ok_or_else(|| {
                Error::IncompleteData(format!(
                    "no record for ({dr}, {scheme}, r={r}) at N={n_nodes}"
                ))
            })?;
        let value = match metric {
            Metric::Mdp => record.mdp_analytic,
            Metric::Ee => record.ee_analytic,
        };
        let tie_key = (r, dr.number(), scheme);
        let replace = match &best {
            None => true,
            Some(current) => {
                value > current.value || (value == current.value && tie_key < current.tie_key)
            }
        };
        if replace {
            best = Some(Candidate {
                value,
                tie_key,
                combo: (dr, scheme, r),
            });
        }
    }
    Ok(best.expect("at least one combo").combo)
}

/// Figure identifiers for the built-in reproduction pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// DR8 delivery probability, analytic and simulated.
    Fig2a,
    /// DR9 delivery probability.
    Fig2b,
    /// Delivery probability, both data rates on one axis.
    Fig3,
    /// Energy efficiency, both data rates.
    Fig4,
    /// Fig. 3 at doubled traffic (8 messages per node per hour).
    Fig5a,
    /// Fig. 4 at doubled traffic.
    Fig5b,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5a,
        Figure::Fig5b,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
        }
    }

    /// Traffic rate the figure is defined at.
    pub fn lambda_per_hour(self) -> f64 {
        match self {
            Figure::Fig5a | Figure::Fig5b => 8.0,
            _ => 4.0,
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Figure::Fig4 | Figure::Fig5b => Metric::Ee,
            _ => Metric::Mdp,
        }
    }

    /// Data rates whose curves the figure contains.
    pub fn dr_list(self) -> Vec<DrId> {
        match self {
            Figure::Fig2a => vec![DrId::Dr8],
            Figure::Fig2b => vec![DrId::Dr9],
            _ => vec![DrId::Dr8, DrId::Dr9],
        }
    }
}

impl std::fmt::Display for Figure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Figure::ALL
            .into_iter()
            .find(|fig| fig.id() == lower)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown figure '{s}' (known: fig2a, fig2b, fig3, fig4, fig5a, fig5b)"
                ))
            })
    }
}

/// The built-in comparison sweep behind `reproduce`: standard operating
/// point, full default grid, simulation on when `runs > 0`.
pub fn paper_sweep_spec(figure: Figure, runs: u64, seed: u64) -> SweepSpec {
    SweepSpec {
        dr_list: figure.dr_list(),
        lambda_per_hour: figure.lambda_per_hour(),
        simulate: runs > 0,
        runs_per_point: if runs > 0 { runs } else { 10_000 },
        seed,
        ..SweepSpec::default()
    }
}
