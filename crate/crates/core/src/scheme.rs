//! Replication strategies behind a common trait, registered by name.
//!
//! Every way of putting a message on the air — plain single transmission,
//! frame replication, fragment replication — implements [`ReplicationScheme`].
//! A strategy owns the four scheme-dependent pieces: message airtime, the
//! closed-form delivery probability, the device-under-test element timeline,
//! and the receiver's combining rule. Strategies are looked up at runtime by
//! registry name, which is also the spelling used in JSON configs, CLI flags,
//! and CSV output.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::analytic::{binomial_tail, replica_fragment_success, LinkProbabilities};
use crate::error::{Error, Result};
use crate::frame::{derive_frame_geometry, time_on_air_frame, FragmentOrder, Scenario};
use crate::sim::{
    push_fragment_round, push_headers, ChannelSource, Element, ElementKind, RunOutcome, DUT_OWNER,
};

/// Which replication scheme a scenario uses. `None` sends each message once.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    #[default]
    None,
    Frame,
    Fragment,
}

impl SchemeKind {
    /// Registry name of the scheme.
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::None => "none",
            SchemeKind::Frame => "frame",
            SchemeKind::Fragment => "fragment",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SchemeKind::None),
            "frame" => Ok(SchemeKind::Frame),
            "fragment" => Ok(SchemeKind::Fragment),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

/// A message-replication strategy.
///
/// Implementations must be pure: identical inputs (including the RNG state)
/// produce identical outputs, so strategies can be shared across threads.
pub trait ReplicationScheme: fmt::Debug + Send + Sync {
    /// Registry name, the spelling used in configs and output files.
    fn name(&self) -> &'static str;

    fn kind(&self) -> SchemeKind;

    /// Replica count `r` carried by this instance.
    fn replicas(&self) -> u32;

    /// Total transmit time for one message (ToA_M), in seconds.
    fn message_airtime(&self, scenario: &Scenario) -> f64;

    /// Message delivery probability given the per-frame link probabilities.
    fn delivery_probability(&self, link: &LinkProbabilities) -> f64;

    /// Element timeline the device under test puts on the air from `t0`.
    fn dut_timeline(&self, scenario: &Scenario, t0: f64, rng: &mut dyn RngCore) -> Vec<Element>;

    /// Apply the receiver's combining rule to per-element collision flags.
    /// `clean[i]` tells whether `dut[i]` escaped every collision.
    fn evaluate_delivery(
        &self,
        scenario: &Scenario,
        dut: &[Element],
        clean: &[bool],
    ) -> RunOutcome;
}

type SchemeFactory = fn(u32) -> Result<Box<dyn ReplicationScheme>>;

/// Name -> factory rows for every registered strategy.
pub const REGISTRY: &[(&str, SchemeFactory)] = &[
    ("none", build_single),
    ("frame", build_frame),
    ("fragment", build_fragment),
];

fn build_single(replicas: u32) -> Result<Box<dyn ReplicationScheme>> {
    if replicas != 1 {
        return Err(Error::invalid(format!(
            "scheme 'none' requires r = 1, got r = {replicas}"
        )));
    }
    Ok(Box::new(SingleTransmission))
}

fn build_frame(replicas: u32) -> Result<Box<dyn ReplicationScheme>> {
    if replicas < 1 {
        return Err(Error::invalid("replica count must be at least 1"));
    }
    Ok(Box::new(FrameReplication { replicas }))
}

fn build_fragment(replicas: u32) -> Result<Box<dyn ReplicationScheme>> {
    if replicas < 1 {
        return Err(Error::invalid("replica count must be at least 1"));
    }
    Ok(Box::new(FragmentReplication { replicas }))
}

/// Names of all registered strategies, in registry order.
pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(name, _)| *name).collect()
}

/// Look a strategy up by registry name.
pub fn by_name(name: &str, replicas: u32) -> Result<Box<dyn ReplicationScheme>> {
    for (candidate, factory) in REGISTRY {
        if *candidate == name {
            return factory(replicas);
        }
    }
    Err(Error::UnknownScheme(name.to_string()))
}

/// Strategy instance for a scheme kind and replica count.
pub fn resolve(kind: SchemeKind, replicas: u32) -> Result<Box<dyn ReplicationScheme>> {
    by_name(kind.name(), replicas)
}

/// Strategy for an already-validated scenario.
pub fn for_scenario(scenario: &Scenario) -> Box<dyn ReplicationScheme> {
    resolve(scenario.scheme, scenario.replicas)
        .expect("scenario scheme/replica pair validated at construction")
}

// ---------------------------------------------------------------------------
// none
// ---------------------------------------------------------------------------

/// Plain LR-FHSS: one frame per message, every fragment sent once.
#[derive(Debug, Clone, Copy)]
pub struct SingleTransmission;

impl ReplicationScheme for SingleTransmission {
    fn name(&self) -> &'static str {
        "none"
    }

    fn kind(&self) -> SchemeKind {
        SchemeKind::None
    }

    fn replicas(&self) -> u32 {
        1
    }

    fn message_airtime(&self, scenario: &Scenario) -> f64 {
        time_on_air_frame(&scenario.geometry, &scenario.profile)
    }

    fn delivery_probability(&self, link: &LinkProbabilities) -> f64 {
        link.s_h * binomial_tail(link.xi_p, link.n_p, link.eps)
    }

    fn dut_timeline(&self, scenario: &Scenario, t0: f64, rng: &mut dyn RngCore) -> Vec<Element> {
        let mut out = Vec::with_capacity(
            (scenario.profile.header_replicas + scenario.geometry.payload_fragments) as usize,
        );
        let channels = ChannelSource::for_node(scenario, rng);
        let cursor = push_headers(&mut out, DUT_OWNER, 0, t0, scenario, &channels, rng);
        push_fragment_round(&mut out, DUT_OWNER, 0, 0, cursor, scenario, &channels, rng);
        out
    }

    fn evaluate_delivery(
        &self,
        scenario: &Scenario,
        dut: &[Element],
        clean: &[bool],
    ) -> RunOutcome {
        let mut header_received = false;
        let mut fragments_recovered = 0;
        for (element, ok) in dut.iter().zip(clean) {
            if !ok {
                continue;
            }
            match element.kind {
                ElementKind::HeaderReplica => header_received = true,
                _ => fragments_recovered += 1,
            }
        }
        RunOutcome {
            delivered: header_received
                && fragments_recovered >= scenario.geometry.decode_threshold,
            header_received,
            fragments_recovered,
        }
    }
}

// ---------------------------------------------------------------------------
// frame replication
// ---------------------------------------------------------------------------

/// The message is sent `r` times as `r` consecutive frames; receiving any one
/// frame in full recovers it.
#[derive(Debug, Clone, Copy)]
pub struct FrameReplication {
    pub replicas: u32,
}

impl ReplicationScheme for FrameReplication {
    fn name(&self) -> &'static str {
        "frame"
    }

    fn kind(&self) -> SchemeKind {
        SchemeKind::Frame
    }

    fn replicas(&self) -> u32 {
        self.replicas
    }

    fn message_airtime(&self, scenario: &Scenario) -> f64 {
        // Transmit time only; any configured inter-frame gap is silence.
        f64::from(self.replicas) * time_on_air_frame(&scenario.geometry, &scenario.profile)
    }

    fn delivery_probability(&self, link: &LinkProbabilities) -> f64 {
        let per_frame = link.s_h * binomial_tail(link.xi_p, link.n_p, link.eps);
        if self.replicas == 1 {
            per_frame
        } else {
            1.0 - (1.0 - per_frame).powi(self.replicas as i32)
        }
    }

    fn dut_timeline(&self, scenario: &Scenario, t0: f64, rng: &mut dyn RngCore) -> Vec<Element> {
        let per_frame =
            (scenario.profile.header_replicas + scenario.geometry.payload_fragments) as usize;
        let mut out = Vec::with_capacity(per_frame * self.replicas as usize);
        let channels = ChannelSource::for_node(scenario, rng);
        let stride =
            time_on_air_frame(&scenario.geometry, &scenario.profile) + scenario.frame_gap_s;
        for frame in 0..self.replicas {
            let start = t0 + f64::from(frame) * stride;
            let cursor = push_headers(&mut out, DUT_OWNER, frame, start, scenario, &channels, rng);
            push_fragment_round(&mut out, DUT_OWNER, frame, 0, cursor, scenario, &channels, rng);
        }
        out
    }

    fn evaluate_delivery(
        &self,
        scenario: &Scenario,
        dut: &[Element],
        clean: &[bool],
    ) -> RunOutcome {
        // One (header seen, clean fragment count) accumulator per replica frame.
        let mut per_frame = vec![(false, 0u32); self.replicas as usize];
        for (element, ok) in dut.iter().zip(clean) {
            if !ok {
                continue;
            }
            let slot = &mut per_frame[element.frame_index as usize];
            match element.kind {
                ElementKind::HeaderReplica => slot.0 = true,
                _ => slot.1 += 1,
            }
        }
        let threshold = scenario.geometry.decode_threshold;
        let delivered = per_frame
            .iter()
            .any(|(header, fragments)| *header && *fragments >= threshold);
        RunOutcome {
            delivered,
            header_received: per_frame.iter().any(|(header, _)| *header),
            fragments_recovered: per_frame.iter().map(|(_, f)| *f).max().unwrap_or(0),
        }
    }
}

// ---------------------------------------------------------------------------
// fragment replication
// ---------------------------------------------------------------------------

/// One frame per message whose payload fragments are each repeated `r` times;
/// a fragment is recovered when any one of its copies is received.
#[derive(Debug, Clone, Copy)]
pub struct FragmentReplication {
    pub replicas: u32,
}

impl ReplicationScheme for FragmentReplication {
    fn name(&self) -> &'static str {
        "fragment"
    }

    fn kind(&self) -> SchemeKind {
        SchemeKind::Fragment
    }

    fn replicas(&self) -> u32 {
        self.replicas
    }

    fn message_airtime(&self, scenario: &Scenario) -> f64 {
        // Billed as one frame whose payload is r times the message size.
        let geometry = derive_frame_geometry(
            self.replicas * scenario.payload_bytes,
            &scenario.profile,
            scenario.geometry.delta_h,
            scenario.geometry.delta_p,
            scenario.geometry.delta_w,
        )
        .expect("scaled payload geometry from a valid scenario");
        time_on_air_frame(&geometry, &scenario.profile)
    }

    fn delivery_probability(&self, link: &LinkProbabilities) -> f64 {
        let combined = replica_fragment_success(link.xi_p, self.replicas);
        link.s_h * binomial_tail(combined, link.n_p, link.eps)
    }

    fn dut_timeline(&self, scenario: &Scenario, t0: f64, rng: &mut dyn RngCore) -> Vec<Element> {
        let geometry = &scenario.geometry;
        let total = (scenario.profile.header_replicas
            + self.replicas * geometry.payload_fragments) as usize;
        let mut out = Vec::with_capacity(total);
        let channels = ChannelSource::for_node(scenario, rng);
        let mut cursor = push_headers(&mut out, DUT_OWNER, 0, t0, scenario, &channels, rng);
        match scenario.fragment_order {
            FragmentOrder::RoundRobin => {
                for round in 0..self.replicas {
                    cursor = push_fragment_round(
                        &mut out, DUT_OWNER, 0, round, cursor, scenario, &channels, rng,
                    );
                }
            }
            FragmentOrder::Contiguous => {
                for fragment in 0..geometry.payload_fragments {
                    let last = fragment + 1 == geometry.payload_fragments;
                    let duration = if last { geometry.delta_l } else { geometry.delta_p };
                    for round in 0..self.replicas {
                        out.push(Element {
                            owner: DUT_OWNER,
                            kind: if last {
                                ElementKind::LastFragment
                            } else {
                                ElementKind::FullFragment
                            },
                            channel: channels.draw(rng),
                            start: cursor,
                            duration,
                            frame_index: 0,
                            fragment_index: fragment,
                            replica_index: round,
                        });
                        cursor += duration;
                    }
                }
            }
        }
        out
    }

    fn evaluate_delivery(
        &self,
        scenario: &Scenario,
        dut: &[Element],
        clean: &[bool],
    ) -> RunOutcome {
        let mut header_received = false;
        let mut recovered = vec![false; scenario.geometry.payload_fragments as usize];
        for (element, ok) in dut.iter().zip(clean) {
            if !ok {
                continue;
            }
            match element.kind {
                ElementKind::HeaderReplica => header_received = true,
                _ => recovered[element.fragment_index as usize] = true,
            }
        }
        let fragments_recovered = recovered.iter().filter(|r| **r).count() as u32;
        RunOutcome {
            delivered: header_received
                && fragments_recovered >= scenario.geometry.decode_threshold,
            header_received,
            fragments_recovered,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_all_names() {
        assert_eq!(names(), vec!["none", "frame", "fragment"]);
        for name in names() {
            let strategy = by_name(name, if name == "none" { 1 } else { 2 }).unwrap();
            assert_eq!(strategy.name(), name);
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(
            by_name("mirror", 1),
            Err(Error::UnknownScheme(name)) if name == "mirror"
        ));
        assert!("mirror".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn replica_counts_are_validated() {
        assert!(by_name("none", 2).is_err());
        assert!(by_name("frame", 0).is_err());
        assert!(by_name("fragment", 0).is_err());
        assert_eq!(by_name("frame", 3).unwrap().replicas(), 3);
    }

    #[test]
    fn scheme_kind_parses_and_displays() {
        for kind in [SchemeKind::None, SchemeKind::Frame, SchemeKind::Fragment] {
            assert_eq!(kind.name().parse::<SchemeKind>().unwrap(), kind);
            assert_eq!(kind.to_string(), kind.name());
        }
    }
}
