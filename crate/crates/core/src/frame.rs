//! Data-rate profiles, frame geometry, and time-on-air.
//!
//! An LR-FHSS frame is a sequence of *elements*: `N_H` header replicas
//! followed (after a short processing wait) by `N_P` payload fragments, the
//! last of which may be shorter than the rest. Everything downstream — the
//! analytic link model and the collision simulator — works from the geometry
//! derived here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{self, SchemeKind};

/// LR-FHSS data-rate identifier. Only the two long-range satellite rates are
/// modeled; everything else is rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DrId {
    Dr8,
    Dr9,
}

impl DrId {
    /// Numeric identifier as it appears in configs and CSV output.
    pub fn number(self) -> u8 {
        match self {
            DrId::Dr8 => 8,
            DrId::Dr9 => 9,
        }
    }
}

impl TryFrom<u8> for DrId {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            8 => Ok(DrId::Dr8),
            9 => Ok(DrId::Dr9),
            other => Err(Error::UnsupportedDataRate(other)),
        }
    }
}

impl From<DrId> for u8 {
    fn from(value: DrId) -> u8 {
        value.number()
    }
}

impl std::fmt::Display for DrId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DR{}", self.number())
    }
}

/// Channel-code rate kept as an exact rational so fragment counts come out of
/// integer arithmetic instead of floating-point ceilings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodingRate {
    pub numerator: u32,
    pub denominator: u32,
}

impl CodingRate {
    pub const fn new(numerator: u32, denominator: u32) -> Self {
        CodingRate {
            numerator,
            denominator,
        }
    }

    /// The rate as a plain fraction in (0, 1].
    pub fn fraction(self) -> f64 {
        f64::from(self.numerator) / f64::from(self.denominator)
    }
}

/// Physical parameters of one data-rate setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataRateProfile {
    pub dr: DrId,
    /// Coding rate `c` of the payload channel code.
    pub coding_rate: CodingRate,
    /// Number of header replicas `N_H` per frame.
    pub header_replicas: u32,
    /// Physical channels `n_c` in the operating channel width.
    pub channel_count: u32,
    /// Channels a single device actually hops over (grid subset of `n_c`).
    pub grid_size: u32,
    /// Occupied bandwidth of one physical channel.
    pub obw_hz: f64,
    /// Overall operating channel width.
    pub ocw_hz: f64,
}

/// Standard profile for a data rate. DR8 and DR9 share the 137 kHz OCW, which
/// at 488 Hz per channel gives 280 physical channels; a device uses a 35
/// channel grid of those to keep successive hops apart.
pub fn dr_profile(dr: DrId) -> DataRateProfile {
    let (coding_rate, header_replicas) = match dr {
        DrId::Dr8 => (CodingRate::new(1, 3), 3),
        DrId::Dr9 => (CodingRate::new(2, 3), 2),
    };
    DataRateProfile {
        dr,
        coding_rate,
        header_replicas,
        channel_count: 280,
        grid_size: 35,
        obw_hz: 488.0,
        ocw_hz: 137_000.0,
    }
}

/// Element-level structure of a frame carrying one payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    /// Payload fragment count `N_P`, including the last fragment.
    pub payload_fragments: u32,
    /// Header replica duration in seconds.
    pub delta_h: f64,
    /// Full payload-fragment duration in seconds.
    pub delta_p: f64,
    /// Last-fragment duration; equals `delta_p` when the payload fills an
    /// integer number of fragments.
    pub delta_l: f64,
    /// Gateway header-processing wait between headers and payload.
    pub delta_w: f64,
    /// Fragments needed to decode, `epsilon = ceil(c * N_P)`.
    pub decode_threshold: u32,
    /// True when the last fragment is strictly shorter than the rest.
    pub has_short_last: bool,
}

/// Derive the fragment layout for a `payload_bytes`-byte payload.
///
/// The fragment count is `ceil((B + 2) / (6c))`, evaluated in integer
/// arithmetic over the rational coding rate. A fractional remainder becomes a
/// short last fragment of `remainder * delta_p` seconds.
pub fn derive_frame_geometry(
    payload_bytes: u32,
    profile: &DataRateProfile,
    delta_h: f64,
    delta_p: f64,
    delta_w: f64,
) -> Result<FrameGeometry> {
    if payload_bytes == 0 {
        return Err(Error::invalid("payload must be at least 1 byte"));
    }
    if !(delta_h > 0.0 && delta_h.is_finite()) || !(delta_p > 0.0 && delta_p.is_finite()) {
        return Err(Error::invalid(
            "header and fragment durations must be positive",
        ));
    }
    if !(delta_w >= 0.0 && delta_w.is_finite()) {
        return Err(Error::invalid("processing wait must be non-negative"));
    }

    let rate = profile.coding_rate;
    // (B + 2) / (6c) = (B + 2) * den / (6 * num)
    let units = u64::from(payload_bytes + 2) * u64::from(rate.denominator);
    let per_fragment = 6 * u64::from(rate.numerator);
    let full = units / per_fragment;
    let remainder = units % per_fragment;
    let payload_fragments = if remainder == 0 { full } else { full + 1 } as u32;

    let (delta_l, has_short_last) = if remainder == 0 {
        (delta_p, false)
    } else {
        (delta_p * remainder as f64 / per_fragment as f64, true)
    };

    // epsilon = ceil(c * N_P)
    let eps_units = u64::from(rate.numerator) * u64::from(payload_fragments);
    let decode_threshold = eps_units.div_ceil(u64::from(rate.denominator)) as u32;

    Ok(FrameGeometry {
        payload_fragments,
        delta_h,
        delta_p,
        delta_l,
        delta_w,
        decode_threshold,
        has_short_last,
    })
}

/// Frame time-on-air: `N_H * delta_h + delta_w + delta_p * N_P`.
///
/// The last fragment is billed at the full fragment duration here even when
/// it is transmitted shorter; the element timeline keeps the true duration
/// and simply leaves the tail of the slot idle.
pub fn time_on_air_frame(geometry: &FrameGeometry, profile: &DataRateProfile) -> f64 {
    f64::from(profile.header_replicas) * geometry.delta_h
        + geometry.delta_w
        + geometry.delta_p * f64::from(geometry.payload_fragments)
}

/// How a node picks channels for its elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Every element hops independently over all `n_c` physical channels.
    /// This matches the analytic model and is the default.
    #[default]
    FullPool,
    /// Each node draws a `grid_size`-channel grid and hops within it.
    Grid,
}

/// Ordering of fragment copies under fragment replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentOrder {
    /// F1..Fn, F1..Fn, ... — whole payload repeated round by round.
    #[default]
    RoundRobin,
    /// F1 F1 .. F2 F2 .. — each fragment's copies back to back.
    Contiguous,
}

/// One complete network / traffic / replication configuration.
///
/// Values are immutable after construction and safe to share across threads;
/// every operation over a `Scenario` is a pure function.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Number of nodes `N` in the network, including the device under test.
    pub n_nodes: u64,
    /// Messages per node per interval, `lambda`.
    pub messages_per_interval: f64,
    /// Observation interval `T` in seconds.
    pub interval_s: f64,
    /// Application payload size `B` in bytes.
    pub payload_bytes: u32,
    /// Replication scheme applied by the device under test.
    pub scheme: SchemeKind,
    /// Replica count `r` (1 for `SchemeKind::None`).
    pub replicas: u32,
    /// Transmit power in watts.
    pub tx_power_w: f64,
    pub profile: DataRateProfile,
    pub geometry: FrameGeometry,
    /// Simulator channel-selection mode (analytic model assumes `FullPool`).
    pub channel_mode: ChannelMode,
    /// Simulator fragment-copy ordering for fragment replication.
    pub fragment_order: FragmentOrder,
    /// Idle gap between replica frames under frame replication.
    pub frame_gap_s: f64,
}

impl Scenario {
    /// Build and validate a scenario. Durations are seconds, power is watts.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dr: DrId,
        n_nodes: u64,
        messages_per_interval: f64,
        interval_s: f64,
        payload_bytes: u32,
        scheme: SchemeKind,
        replicas: u32,
        tx_power_w: f64,
        delta_h_s: f64,
        delta_p_s: f64,
        delta_w_s: f64,
    ) -> Result<Self> {
        if n_nodes < 1 {
            return Err(Error::invalid("node count must be at least 1"));
        }
        if !(messages_per_interval > 0.0 && messages_per_interval.is_finite()) {
            return Err(Error::invalid("message rate must be positive"));
        }
        if !(interval_s > 0.0 && interval_s.is_finite()) {
            return Err(Error::invalid("interval must be positive"));
        }
        if !(tx_power_w > 0.0 && tx_power_w.is_finite()) {
            return Err(Error::invalid("transmit power must be positive"));
        }
        // Validates the (scheme, r) pair: r >= 1, and r == 1 for `none`.
        scheme::resolve(scheme, replicas)?;

        let profile = dr_profile(dr);
        let geometry =
            derive_frame_geometry(payload_bytes, &profile, delta_h_s, delta_p_s, delta_w_s)?;
        Ok(Scenario {
            n_nodes,
            messages_per_interval,
            interval_s,
            payload_bytes,
            scheme,
            replicas,
            tx_power_w,
            profile,
            geometry,
            channel_mode: ChannelMode::default(),
            fragment_order: FragmentOrder::default(),
            frame_gap_s: 0.0,
        })
    }

    /// Offered load per node per unit time, `G = lambda / T`.
    pub fn offered_load(&self) -> f64 {
        self.messages_per_interval / self.interval_s
    }

    /// Override the physical channel count used by both the analytic model
    /// and the simulator (for instance 35 to study the per-device grid).
    pub fn with_channel_count(mut self, channel_count: u32) -> Result<Self> {
        if channel_count < 2 {
            return Err(Error::invalid("channel count must be at least 2"));
        }
        self.profile.channel_count = channel_count;
        self.profile.grid_size = self.profile.grid_size.min(channel_count);
        Ok(self)
    }

    pub fn with_channel_mode(mut self, mode: ChannelMode) -> Self {
        self.channel_mode = mode;
        self
    }

    pub fn with_fragment_order(mut self, order: FragmentOrder) -> Self {
        self.fragment_order = order;
        self
    }

    pub fn with_frame_gap(mut self, gap_s: f64) -> Result<Self> {
        if !(gap_s >= 0.0 && gap_s.is_finite()) {
            return Err(Error::invalid("frame gap must be non-negative"));
        }
        self.frame_gap_s = gap_s;
        Ok(self)
    }
}

/// Total transmit time for one message under the scenario's scheme (ToA_M).
///
/// No replication sends one frame; frame replication sends `r` frames;
/// fragment replication sends one frame sized for an `r`-times payload.
pub fn message_airtime(scenario: &Scenario) -> f64 {
    scheme::for_scenario(scenario).message_airtime(scenario)
}

/// Convert a dBm figure to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// JSON scenario document. Keys mirror the scenario fields; durations are
/// seconds and power is dBm (converted to watts at ingestion).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub dr: u8,
    pub nodes: u64,
    pub lambda_per_hour: f64,
    pub interval_s: f64,
    pub payload_bytes: u32,
    pub scheme: String,
    pub r: u32,
    pub power_dbm: f64,
    pub delta_h_s: f64,
    pub delta_p_s: f64,
    pub delta_w_s: f64,
}

impl Default for ScenarioConfig {
    /// The built-in "paper2024" operating point: 15-byte payloads, 233 ms
    /// headers, 102 ms fragments, 14 dBm, 4 messages per node per hour.
    fn default() -> Self {
        ScenarioConfig {
            dr: 8,
            nodes: 1000,
            lambda_per_hour: 4.0,
            interval_s: 3600.0,
            payload_bytes: 15,
            scheme: "none".to_string(),
            r: 1,
            power_dbm: 14.0,
            delta_h_s: 0.233,
            delta_p_s: 0.102,
            delta_w_s: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let dr = DrId::try_from(self.dr)?;
        let kind: SchemeKind = self.scheme.parse()?;
        if !(self.lambda_per_hour > 0.0 && self.lambda_per_hour.is_finite()) {
            return Err(Error::invalid("lambda_per_hour must be positive"));
        }
        let messages_per_interval = self.lambda_per_hour * self.interval_s / 3600.0;
        Scenario::new(
            dr,
            self.nodes,
            messages_per_interval,
            self.interval_s,
            self.payload_bytes,
            kind,
            self.r,
            dbm_to_watts(self.power_dbm),
            self.delta_h_s,
            self.delta_p_s,
            self.delta_w_s,
        )
    }
}
