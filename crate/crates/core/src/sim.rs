//! Monte Carlo simulator of the collision process.
//!
//! Each run places the device under test's element timeline at a random
//! offset, surrounds it with Poisson background traffic restricted to the
//! occupied window, flags each element that shares a channel and overlaps a
//! background element in time, and scores delivery with the scenario's
//! replication strategy. Runs draw from private ChaCha substreams derived
//! from `(seed, run index)`, so results are bit-identical whether runs
//! execute serially or in parallel.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{time_on_air_frame, ChannelMode, Scenario};
use crate::scheme::{self, ReplicationScheme};

/// Owner id reserved for the device under test; background frames get ids
/// starting at 1.
pub const DUT_OWNER: u64 = 0;

/// Two-sided normal quantiles for the Wilson interval.
pub const Z_95: f64 = 1.959963984540054;
pub const Z_99: f64 = 2.5758293035489004;

/// What a single on-air element is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    HeaderReplica,
    FullFragment,
    LastFragment,
}

/// One on-air transmission unit: a header replica or a payload fragment copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub owner: u64,
    pub kind: ElementKind,
    /// Physical channel index in `[0, n_c)`.
    pub channel: u16,
    /// Start time in seconds.
    pub start: f64,
    /// On-air duration in seconds.
    pub duration: f64,
    /// Replica frame the element belongs to (frame replication only).
    pub frame_index: u32,
    /// Fragment position in the original payload; header replica slot for headers.
    pub fragment_index: u32,
    /// Fragment-replication round the copy belongs to (0 otherwise).
    pub replica_index: u32,
}

impl Element {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Collision test: same channel and open-interval time overlap. Intervals
    /// that merely touch at an endpoint do not collide.
    pub fn collides_with(&self, other: &Element) -> bool {
        self.channel == other.channel && self.start < other.end() && other.start < self.end()
    }
}

/// Result of one simulated message transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub delivered: bool,
    pub header_received: bool,
    /// Unique fragments recovered (best replica frame under frame replication).
    pub fragments_recovered: u32,
}

/// Aggregated Monte Carlo estimate with a Wilson 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpEstimate {
    pub runs: u64,
    pub successes: u64,
    pub mdp_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

/// Wilson score interval for a binomial proportion. Always brackets the
/// point estimate, with exact endpoints at 0 and 1.
pub fn wilson_interval(successes: u64, runs: u64, z: f64) -> (f64, f64) {
    let n = runs as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let high = if successes == runs {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (low, high)
}

/// How a node picks channels for its elements.
#[derive(Debug, Clone)]
pub(crate) enum ChannelSource {
    /// Independent uniform draws over the full physical pool.
    FullPool { channel_count: u32 },
    /// Uniform draws within a per-node grid subset.
    Grid { channels: Vec<u16> },
}

impl ChannelSource {
    pub(crate) fn for_node(scenario: &Scenario, rng: &mut dyn RngCore) -> ChannelSource {
        match scenario.channel_mode {
            ChannelMode::FullPool => ChannelSource::FullPool {
                channel_count: scenario.profile.channel_count,
            },
            ChannelMode::Grid => {
                let picked = rand::seq::index::sample(
                    rng,
                    scenario.profile.channel_count as usize,
                    scenario.profile.grid_size as usize,
                )
                .into_iter()
                .map(|i| i as u16)
                .collect();
                ChannelSource::Grid { channels: picked }
            }
        }
    }

    pub(crate) fn draw(&self, rng: &mut dyn RngCore) -> u16 {
        match self {
            ChannelSource::FullPool { channel_count } => {
                rng.random_range(0..*channel_count) as u16
            }
            ChannelSource::Grid { channels } => channels[rng.random_range(0..channels.len())],
        }
    }
}

/// Append the `N_H` header replicas of one frame; returns the time cursor
/// after the headers and the processing wait.
pub(crate) fn push_headers(
    out: &mut Vec<Element>,
    owner: u64,
    frame_index: u32,
    start: f64,
    scenario: &Scenario,
    channels: &ChannelSource,
    rng: &mut dyn RngCore,
) -> f64 {
    let g = &scenario.geometry;
    let mut cursor = start;
    for slot in 0..scenario.profile.header_replicas {
        out.push(Element {
            owner,
            kind: ElementKind::HeaderReplica,
            channel: channels.draw(rng),
            start: cursor,
            duration: g.delta_h,
            frame_index,
            fragment_index: slot,
            replica_index: 0,
        });
        cursor += g.delta_h;
    }
    cursor + g.delta_w
}

/// Append one full round of payload fragments; returns the cursor after the
/// round. The last fragment keeps its true (possibly shorter) duration.
#[allow(clippy::too_many_arguments)]
pub(crate) fn push_fragment_round(
    out: &mut Vec<Element>,
    owner: u64,
    frame_index: u32,
    replica_index: u32,
    start: f64,
    scenario: &Scenario,
    channels: &ChannelSource,
    rng: &mut dyn RngCore,
) -> f64 {
    let g = &scenario.geometry;
    let mut cursor = start;
    for fragment in 0..g.payload_fragments {
        let last = fragment + 1 == g.payload_fragments;
        let duration = if last { g.delta_l } else { g.delta_p };
        out.push(Element {
            owner,
            kind: if last {
                ElementKind::LastFragment
            } else {
                ElementKind::FullFragment
            },
            channel: channels.draw(rng),
            start: cursor,
            duration,
            frame_index,
            fragment_index: fragment,
            replica_index,
        });
        cursor += duration;
    }
    cursor
}

/// Element timeline of the device under test, starting at `t0`.
pub fn build_dut_timeline(scenario: &Scenario, t0: f64, rng: &mut dyn RngCore) -> Vec<Element> {
    scheme::for_scenario(scenario).dut_timeline(scenario, t0, rng)
}

/// Background traffic whose elements can overlap the open window `(w0, w1)`.
///
/// Frame starts form a homogeneous Poisson process of rate `(N-1) lambda / T`
/// over the window extended one frame duration to the left, so frames that
/// begin earlier but reach into the window are included. Each frame is a
/// plain single transmission (only the device under test replicates), and
/// elements with no possible overlap are dropped.
pub fn generate_background(
    scenario: &Scenario,
    window: (f64, f64),
    rng: &mut dyn RngCore,
) -> Result<Vec<Element>> {
    let (w0, w1) = window;
    if !(w0.is_finite() && w1.is_finite() && w1 > w0) {
        return Err(Error::invalid(format!(
            "background window [{w0}, {w1}] must be a nonempty interval"
        )));
    }
    let frame_airtime = time_on_air_frame(&scenario.geometry, &scenario.profile);
    let rate =
        (scenario.n_nodes - 1) as f64 * scenario.messages_per_interval / scenario.interval_s;
    let lo = w0 - frame_airtime;
    let mean = rate * (w1 - lo);
    let mut out = Vec::new();
    if mean <= 0.0 {
        return Ok(out);
    }
    let frames = Poisson::new(mean)
        .expect("positive Poisson mean")
        .sample(rng) as u64;
    for frame in 0..frames {
        let owner = frame + 1;
        let start = rng.random_range(lo..w1);
        let channels = ChannelSource::for_node(scenario, rng);
        let cursor = push_headers(&mut out, owner, 0, start, scenario, &channels, rng);
        push_fragment_round(&mut out, owner, 0, 0, cursor, scenario, &channels, rng);
    }
    // An element with no open-interval overlap against (w0, w1) cannot touch
    // anything the device under test sends inside the window.
    out.retain(|e| e.start < w1 && e.end() > w0);
    debug_assert!(out.iter().all(|e| e.start < w1 && e.end() > w0));
    Ok(out)
}

/// Per-DUT-element collision flags: `true` means the element survived.
///
/// A DUT element is clean iff no background element shares its channel and
/// overlaps it in time (open intervals). DUT elements never collide with each
/// other: a node is a serial transmitter, so its own elements are disjoint.
pub fn detect_clean_elements(dut: &[Element], background: &[Element]) -> Vec<bool> {
    // Bucket the (typically much larger) background by channel.
    let max_channel = background.iter().map(|e| e.channel).max().unwrap_or(0) as usize;
    let mut by_channel: Vec<Vec<(f64, f64)>> = vec![Vec::new(); max_channel + 1];
    for e in background {
        by_channel[e.channel as usize].push((e.start, e.end()));
    }
    dut.iter()
        .map(|e| {
            let Some(bucket) = by_channel.get(e.channel as usize) else {
                return true;
            };
            let end = e.end();
            !bucket
                .iter()
                .any(|&(b_start, b_end)| e.start < b_end && b_start < end)
        })
        .collect()
}

/// Apply the scenario's reception rule to the collision flags.
pub fn evaluate_delivery(scenario: &Scenario, dut: &[Element], clean: &[bool]) -> RunOutcome {
    debug_assert_eq!(dut.len(), clean.len());
    scheme::for_scenario(scenario).evaluate_delivery(scenario, dut, clean)
}

/// Private random substream for one run.
fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn simulate_one(
    scenario: &Scenario,
    strategy: &dyn ReplicationScheme,
    message_airtime: f64,
    seed: u64,
    run_index: u64,
) -> bool {
    let mut rng = run_rng(seed, run_index);
    let span = scenario.interval_s - message_airtime;
    let t0 = if span > 0.0 {
        rng.random_range(0.0..span)
    } else {
        0.0
    };
    let dut = strategy.dut_timeline(scenario, t0, &mut rng);
    let w0 = dut.iter().map(|e| e.start).fold(f64::INFINITY, f64::min);
    let w1 = dut.iter().map(|e| e.end()).fold(f64::NEG_INFINITY, f64::max);
    let background =
        generate_background(scenario, (w0, w1), &mut rng).expect("DUT window is nonempty");
    let clean = detect_clean_elements(&dut, &background);
    strategy.evaluate_delivery(scenario, &dut, &clean).delivered
}

fn estimate(successes: u64, runs: u64, seed: u64) -> MdpEstimate {
    let (ci_low, ci_high) = wilson_interval(successes, runs, Z_95);
    MdpEstimate {
        runs,
        successes,
        mdp_hat: successes as f64 / runs as f64,
        ci_low,
        ci_high,
        seed,
    }
}

fn prepare(scenario: &Scenario, runs: u64) -> Result<(Box<dyn ReplicationScheme>, f64)> {
    if runs == 0 {
        return Err(Error::invalid("run count must be at least 1"));
    }
    let strategy = scheme::for_scenario(scenario);
    let toa_m = strategy.message_airtime(scenario);
    if toa_m > scenario.interval_s {
        return Err(Error::invalid(
            "message airtime exceeds the observation interval",
        ));
    }
    Ok((strategy, toa_m))
}

/// Monte Carlo estimate of the message delivery probability.
///
/// Runs execute in parallel; the estimate is bit-identical to
/// [`run_monte_carlo_serial`] for the same `(scenario, runs, seed)`.
pub fn run_monte_carlo(scenario: &Scenario, runs: u64, seed: u64) -> Result<MdpEstimate> {
    let (strategy, toa_m) = prepare(scenario, runs)?;
    let strategy: &dyn ReplicationScheme = strategy.as_ref();
    let successes = (0..runs)
        .into_par_iter()
        .map(|run| u64::from(simulate_one(scenario, strategy, toa_m, seed, run)))
        .sum();
    Ok(estimate(successes, runs, seed))
}

/// Single-threaded variant of [`run_monte_carlo`].
pub fn run_monte_carlo_serial(scenario: &Scenario, runs: u64, seed: u64) -> Result<MdpEstimate> {
    let (strategy, toa_m) = prepare(scenario, runs)?;
    let successes = (0..runs)
        .map(|run| u64::from(simulate_one(scenario, strategy.as_ref(), toa_m, seed, run)))
        .sum();
    Ok(estimate(successes, runs, seed))
}
