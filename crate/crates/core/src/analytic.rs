//! Closed-form message-delivery and energy-efficiency model.
//!
//! The chain mirrors the collision analysis: per-node traffic fixes the
//! inter-arrival times of the three background element classes; those give
//! the expected number of elements inside each vulnerable window; the
//! survival factor `((n_c - 1)/n_c)^(alpha - 1)` turns exposure into loss
//! probabilities; a binomial tail over the fragments and an any-of rule over
//! the header replicas yield the frame success probability; the replication
//! strategy combines frames or fragment copies on top.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{message_airtime, DataRateProfile, FrameGeometry, Scenario};
use crate::scheme;

/// Mean inter-arrival times, in seconds, of background header replicas,
/// full payload fragments, and last fragments. `t_p` is infinite when frames
/// carry a single fragment (no full-fragment interferers exist), and every
/// downstream term divides by it, contributing zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterArrivals {
    pub t_h: f64,
    pub t_p: f64,
    pub t_l: f64,
}

/// Expected number of background elements transmitted inside the vulnerable
/// window of a header replica, a full fragment, and a last fragment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposures {
    pub alpha_h: f64,
    pub alpha_p: f64,
    pub alpha_l: f64,
}

/// Per-frame link probabilities a replication strategy needs.
#[derive(Debug, Clone, Copy)]
pub struct LinkProbabilities {
    /// Probability that at least one header replica is received.
    pub s_h: f64,
    /// Probability that a single payload fragment is received.
    pub xi_p: f64,
    pub n_p: u32,
    pub eps: u32,
}

/// Full analytic summary for one scenario.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeliveryReport {
    /// Header success probability S_H.
    pub s_h: f64,
    /// Single-fragment success probability xi_P.
    pub xi_p: f64,
    /// Payload success probability S_P (no replication).
    pub s_p: f64,
    /// Frame success probability S = S_H * S_P.
    pub s: f64,
    /// Message delivery probability under the scenario's scheme.
    pub mdp: f64,
    /// Energy efficiency in messages per joule.
    pub ee: f64,
    /// Message airtime ToA_M in seconds.
    pub toa_m: f64,
}

/// Inter-arrival times of the three element classes for a scenario's
/// aggregate traffic: `T_H = T/(N lambda N_H)`, `T_P = T/(N lambda (N_P-1))`,
/// `T_L = T/(N lambda)`.
pub fn interarrival_times(scenario: &Scenario) -> InterArrivals {
    let n = scenario.n_nodes as f64;
    let lambda = scenario.messages_per_interval;
    let interval = scenario.interval_s;
    let n_p = scenario.geometry.payload_fragments;
    InterArrivals {
        t_h: interval / (n * lambda * f64::from(scenario.profile.header_replicas)),
        t_p: if n_p > 1 {
            interval / (n * lambda * f64::from(n_p - 1))
        } else {
            f64::INFINITY
        },
        t_l: interval / (n * lambda),
    }
}

/// Expected element counts inside each vulnerable window.
///
/// Each term divides a vulnerable time by the matching inter-arrival time;
/// the window of an element of duration `d` against interferers of duration
/// `d'` spans `d + d'` (and `2d` against its own class).
pub fn collision_exposures(scenario: &Scenario, inter: &InterArrivals) -> Exposures {
    let g = &scenario.geometry;
    Exposures {
        alpha_h: 2.0 * g.delta_h / inter.t_h
            + (g.delta_h + g.delta_p) / inter.t_p
            + (g.delta_h + g.delta_l) / inter.t_l,
        alpha_p: 2.0 * g.delta_p / inter.t_p
            + (g.delta_h + g.delta_p) / inter.t_h
            + (g.delta_p + g.delta_l) / inter.t_l,
        alpha_l: 2.0 * g.delta_l / inter.t_l
            + (g.delta_h + g.delta_l) / inter.t_h
            + (g.delta_p + g.delta_l) / inter.t_p,
    }
}

/// Survival factor `((n_c - 1)/n_c)^(alpha - 1)`.
///
/// The exponent is clamped at zero: with fewer than one expected interferer
/// the factor would otherwise exceed 1 and turn into a negative loss.
fn survival(alpha: f64, channel_count: u32) -> f64 {
    let q = (f64::from(channel_count) - 1.0) / f64::from(channel_count);
    q.powf((alpha - 1.0).max(0.0))
}

/// Probability that at least one of the `N_H` header replicas survives.
pub fn header_success_prob(exposures: &Exposures, profile: &DataRateProfile) -> f64 {
    let loss = 1.0 - survival(exposures.alpha_h, profile.channel_count);
    (1.0 - loss.powi(profile.header_replicas as i32)).clamp(0.0, 1.0)
}

/// Probability that a single payload fragment survives, averaged over the
/// `N_P - 1` full fragments and the last fragment.
pub fn fragment_success_prob(
    exposures: &Exposures,
    geometry: &FrameGeometry,
    profile: &DataRateProfile,
) -> f64 {
    let n_p = f64::from(geometry.payload_fragments);
    let mixed = ((n_p - 1.0) * survival(exposures.alpha_p, profile.channel_count)
        + survival(exposures.alpha_l, profile.channel_count))
        / n_p;
    mixed.clamp(0.0, 1.0)
}

/// At-least-`k` binomial tail: `sum_{i=k}^{n} C(n,i) xi^i (1-xi)^(n-i)`.
pub(crate) fn binomial_tail(xi: f64, n: u32, k: u32) -> f64 {
    debug_assert!((1..=n).contains(&k));
    let mut coefficient = 1.0;
    for i in 0..k {
        coefficient *= f64::from(n - i) / f64::from(i + 1);
    }
    let mut sum = 0.0;
    let mut c = coefficient;
    for i in k..=n {
        sum += c * xi.powi(i as i32) * (1.0 - xi).powi((n - i) as i32);
        if i < n {
            c *= f64::from(n - i) / f64::from(i + 1);
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Probability of receiving at least `eps` of `n_p` fragments when each
/// survives independently with probability `xi`. Also evaluates the
/// fragment-replication payload term when handed the combined `xi`.
pub fn payload_success_prob(xi: f64, n_p: u32, eps: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::invalid("fragment success probability outside [0, 1]"));
    }
    if eps < 1 || eps > n_p {
        return Err(Error::invalid(format!(
            "decode threshold {eps} outside [1, {n_p}]"
        )));
    }
    Ok(binomial_tail(xi, n_p, eps))
}

/// Fragment success after OR-combining `r` copies: `1 - (1 - xi)^r`.
/// `r = 1` returns `xi` itself so the degenerate case is bit-exact.
pub fn replica_fragment_success(xi_p: f64, r: u32) -> f64 {
    if r == 1 {
        xi_p
    } else {
        1.0 - (1.0 - xi_p).powi(r as i32)
    }
}

/// The link probabilities every strategy scores against.
pub fn link_probabilities(scenario: &Scenario) -> LinkProbabilities {
    let inter = interarrival_times(scenario);
    let exposures = collision_exposures(scenario, &inter);
    LinkProbabilities {
        s_h: header_success_prob(&exposures, &scenario.profile),
        xi_p: fragment_success_prob(&exposures, &scenario.geometry, &scenario.profile),
        n_p: scenario.geometry.payload_fragments,
        eps: scenario.geometry.decode_threshold,
    }
}

/// Single-frame success probability `S = S_H * S_P`.
pub fn frame_success_prob(scenario: &Scenario) -> f64 {
    let link = link_probabilities(scenario);
    link.s_h * binomial_tail(link.xi_p, link.n_p, link.eps)
}

/// Message delivery probability under the scenario's replication scheme.
pub fn mdp(scenario: &Scenario) -> f64 {
    scheme::for_scenario(scenario).delivery_probability(&link_probabilities(scenario))
}

/// Energy efficiency in delivered messages per joule of transmit energy.
pub fn energy_efficiency(scenario: &Scenario, mdp: f64) -> f64 {
    mdp / (scenario.tx_power_w * message_airtime(scenario))
}

/// Evaluate the whole chain once.
pub fn delivery_report(scenario: &Scenario) -> DeliveryReport {
    let link = link_probabilities(scenario);
    let s_p = binomial_tail(link.xi_p, link.n_p, link.eps);
    let s = link.s_h * s_p;
    let mdp = scheme::for_scenario(scenario).delivery_probability(&link);
    let toa_m = message_airtime(scenario);
    DeliveryReport {
        s_h: link.s_h,
        xi_p: link.xi_p,
        s_p,
        s,
        mdp,
        ee: mdp / (scenario.tx_power_w * toa_m),
        toa_m,
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle values
mod tests {
    use super::*;
    use crate::frame::{dbm_to_watts, DrId};
    use crate::scheme::SchemeKind;
    use approx::assert_relative_eq;

    fn scenario(dr: DrId, n_nodes: u64, scheme: SchemeKind, r: u32) -> Scenario {
        Scenario::new(
            dr,
            n_nodes,
            4.0,
            3600.0,
            15,
            scheme,
            r,
            dbm_to_watts(14.0),
            0.233,
            0.102,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn interarrivals_at_reference_point() {
        let s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        let inter = interarrival_times(&s);
        assert_relative_eq!(inter.t_h, 0.3, max_relative = 1e-12);
        assert_relative_eq!(inter.t_p, 0.1125, max_relative = 1e-12);
        assert_relative_eq!(inter.t_l, 0.9, max_relative = 1e-12);
    }

    #[test]
    fn interarrivals_single_fragment_frame_is_unbounded() {
        // B = 1 at DR9 packs into a single fragment.
        let s = Scenario::new(
            DrId::Dr9,
            1000,
            4.0,
            3600.0,
            1,
            SchemeKind::None,
            1,
            0.025,
            0.233,
            0.102,
            0.0,
        )
        .unwrap();
        assert_eq!(s.geometry.payload_fragments, 1);
        let inter = interarrival_times(&s);
        assert!(inter.t_p.is_infinite());
        assert_eq!(1.0 / inter.t_p, 0.0);
        // The unbounded class contributes nothing to any exposure.
        let ex = collision_exposures(&s, &inter);
        assert!(ex.alpha_p.is_finite() && ex.alpha_h.is_finite() && ex.alpha_l.is_finite());
    }

    #[test]
    fn doubling_nodes_halves_interarrivals() {
        let a = interarrival_times(&scenario(DrId::Dr8, 1000, SchemeKind::None, 1));
        let b = interarrival_times(&scenario(DrId::Dr8, 2000, SchemeKind::None, 1));
        assert_relative_eq!(b.t_h, a.t_h / 2.0, max_relative = 1e-12);
        assert_relative_eq!(b.t_p, a.t_p / 2.0, max_relative = 1e-12);
        assert_relative_eq!(b.t_l, a.t_l / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn exposures_at_reference_point() {
        let s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        let ex = collision_exposures(&s, &interarrival_times(&s));
        // 2*0.233/0.3 + 0.335/0.1125 + 0.284/0.9 = 727/150
        assert_relative_eq!(ex.alpha_h, 727.0 / 150.0, max_relative = 1e-9);
        // 2*0.102/0.1125 + 0.335/0.3 + 0.153/0.9 = 3.1
        assert_relative_eq!(ex.alpha_p, 3.1, max_relative = 1e-9);
        // 0.102/0.9 + 0.284/0.3 + 0.153/0.1125 = 2.42
        assert_relative_eq!(ex.alpha_l, 2.42, max_relative = 1e-9);
    }

    #[test]
    fn exposures_vanish_with_traffic() {
        let mut s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        s.messages_per_interval = 1e-9;
        let ex = collision_exposures(&s, &interarrival_times(&s));
        assert!(ex.alpha_h < 1e-6 && ex.alpha_p < 1e-6 && ex.alpha_l < 1e-6);
    }

    #[test]
    fn header_success_at_reference_point() {
        let s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        let ex = collision_exposures(&s, &interarrival_times(&s));
        let loss = 1.0 - survival(ex.alpha_h, 280);
        assert_relative_eq!(loss, 0.013668413331411916, max_relative = 1e-9);
        assert_relative_eq!(
            header_success_prob(&ex, &s.profile),
            0.9999974463915308,
            max_relative = 1e-9
        );
    }

    #[test]
    fn header_success_limits() {
        let profile = crate::frame::dr_profile(DrId::Dr8);
        // Exactly one expected element in the window: exponent is zero.
        let ex = Exposures {
            alpha_h: 1.0,
            alpha_p: 1.0,
            alpha_l: 1.0,
        };
        assert_eq!(header_success_prob(&ex, &profile), 1.0);
        // Below one expected element the clamp keeps the loss at zero.
        let low = Exposures {
            alpha_h: 0.25,
            alpha_p: 0.25,
            alpha_l: 0.25,
        };
        assert_eq!(header_success_prob(&low, &profile), 1.0);
        // A huge channel pool drives the loss to zero.
        let mut wide = profile;
        wide.channel_count = u32::MAX;
        let ex_heavy = Exposures {
            alpha_h: 50.0,
            alpha_p: 50.0,
            alpha_l: 50.0,
        };
        assert!(header_success_prob(&ex_heavy, &wide) > 0.999_999);
    }

    #[test]
    fn fragment_success_at_reference_point() {
        let s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        let ex = collision_exposures(&s, &interarrival_times(&s));
        assert_relative_eq!(
            fragment_success_prob(&ex, &s.geometry, &s.profile),
            0.99278335785899358,
            max_relative = 1e-9
        );
    }

    #[test]
    fn fragment_success_single_fragment_uses_last_term_only() {
        let profile = crate::frame::dr_profile(DrId::Dr9);
        let geometry = crate::frame::derive_frame_geometry(1, &profile, 0.233, 0.102, 0.0).unwrap();
        assert_eq!(geometry.payload_fragments, 1);
        let ex = Exposures {
            alpha_h: 5.0,
            alpha_p: 9.0,
            alpha_l: 3.0,
        };
        let expected = survival(3.0, profile.channel_count);
        assert_relative_eq!(
            fragment_success_prob(&ex, &geometry, &profile),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn payload_success_examples() {
        assert_eq!(payload_success_prob(1.0, 9, 3).unwrap(), 1.0);
        assert_eq!(payload_success_prob(0.0, 9, 3).unwrap(), 0.0);
        // P(at least 2 heads of 3 fair coins) = 4/8.
        assert_relative_eq!(
            payload_success_prob(0.5, 3, 2).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        assert!(payload_success_prob(0.5, 3, 4).is_err());
        assert!(payload_success_prob(0.5, 3, 0).is_err());
        assert!(payload_success_prob(1.5, 3, 2).is_err());
    }

    #[test]
    fn payload_success_matches_exhaustive_enumeration() {
        // Brute-force oracle: walk all 2^n outcome masks.
        fn enumerate(xi: f64, n: u32, eps: u32) -> f64 {
            let mut total = 0.0;
            for mask in 0u32..(1 << n) {
                let successes = mask.count_ones();
                if successes >= eps {
                    let p = xi.powi(successes as i32) * (1.0 - xi).powi((n - successes) as i32);
                    total += p;
                }
            }
            total
        }
        for n in 1..=10u32 {
            for eps in 1..=n {
                for step in 0..=10 {
                    let xi = f64::from(step) / 10.0;
                    let fast = payload_success_prob(xi, n, eps).unwrap();
                    let slow = enumerate(xi, n, eps);
                    assert!(
                        (fast - slow).abs() <= 1e-12,
                        "n={n} eps={eps} xi={xi}: {fast} vs {slow}"
                    );
                }
            }
        }
    }

    #[test]
    fn replica_combining() {
        assert_eq!(replica_fragment_success(0.37, 1), 0.37);
        assert_relative_eq!(replica_fragment_success(0.9, 2), 0.99, max_relative = 1e-12);
        assert_eq!(replica_fragment_success(0.0, 5), 0.0);
        assert_eq!(replica_fragment_success(1.0, 5), 1.0);
    }

    #[test]
    fn frame_success_composition() {
        let s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        let link = link_probabilities(&s);
        let s_p = binomial_tail(link.xi_p, link.n_p, link.eps);
        assert_eq!(frame_success_prob(&s), link.s_h * s_p);
        assert_relative_eq!(
            frame_success_prob(&s),
            0.99999744639149457,
            max_relative = 1e-9
        );
        // DR9 anchor for the same operating point.
        let s9 = scenario(DrId::Dr9, 1000, SchemeKind::None, 1);
        assert_relative_eq!(
            frame_success_prob(&s9),
            0.99990058292720709,
            max_relative = 1e-9
        );
    }

    #[test]
    fn zero_traffic_limit_is_certain_delivery() {
        for kind in [SchemeKind::None, SchemeKind::Frame, SchemeKind::Fragment] {
            let r = if kind == SchemeKind::None { 1 } else { 3 };
            let mut s = scenario(DrId::Dr8, 1000, kind, r);
            s.messages_per_interval = 1e-12;
            assert_eq!(mdp(&s), 1.0);
        }
    }

    #[test]
    fn frame_replication_degenerates_exactly() {
        for dr in [DrId::Dr8, DrId::Dr9] {
            for n in [100, 5000, 200_000] {
                let none = mdp(&scenario(dr, n, SchemeKind::None, 1));
                let frame1 = mdp(&scenario(dr, n, SchemeKind::Frame, 1));
                let frag1 = mdp(&scenario(dr, n, SchemeKind::Fragment, 1));
                assert_eq!(none, frame1);
                assert_eq!(none, frag1);
            }
        }
    }

    #[test]
    fn frame_replication_arithmetic() {
        // 1 - (1 - 0.5)^2 on a synthetic link.
        let link = LinkProbabilities {
            s_h: 0.5,
            xi_p: 1.0,
            n_p: 9,
            eps: 3,
        };
        let strategy = crate::scheme::resolve(SchemeKind::Frame, 2).unwrap();
        assert_relative_eq!(
            strategy.delivery_probability(&link),
            0.75,
            max_relative = 1e-12
        );
    }

    #[test]
    fn energy_efficiency_examples() {
        let s = scenario(DrId::Dr8, 1000, SchemeKind::None, 1);
        assert_relative_eq!(
            energy_efficiency(&s, 1.0),
            24.62010949619649,
            max_relative = 1e-9
        );
        assert_eq!(energy_efficiency(&s, 0.0), 0.0);
        // Doubling the airtime at fixed MDP halves the efficiency.
        let doubled = scenario(DrId::Dr8, 1000, SchemeKind::Frame, 2);
        assert_relative_eq!(
            energy_efficiency(&doubled, 1.0),
            energy_efficiency(&s, 1.0) / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn report_is_internally_consistent() {
        let s = scenario(DrId::Dr9, 20000, SchemeKind::Fragment, 3);
        let report = delivery_report(&s);
        assert_eq!(report.s, report.s_h * report.s_p);
        assert_eq!(report.mdp, mdp(&s));
        assert_relative_eq!(
            report.ee,
            energy_efficiency(&s, report.mdp),
            max_relative = 1e-12
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_scenario() -> impl Strategy<Value = Scenario> {
            (
                prop_oneof![Just(DrId::Dr8), Just(DrId::Dr9)],
                1u64..200_000,
                0.01f64..50.0,
                1u32..128,
                prop_oneof![
                    Just((SchemeKind::None, 1u32)),
                    (Just(SchemeKind::Frame), 1u32..5),
                    (Just(SchemeKind::Fragment), 1u32..5),
                ]
                .prop_map(|(k, r)| (k, r)),
            )
                .prop_map(|(dr, n, lambda, payload, (kind, r))| {
                    Scenario::new(
                        dr,
                        n,
                        lambda,
                        3600.0,
                        payload,
                        kind,
                        r,
                        0.0251,
                        0.233,
                        0.102,
                        0.0,
                    )
                    .unwrap()
                })
        }

        proptest! {
            // Every probability the model produces stays inside [0, 1].
            #[test]
            fn probabilities_stay_in_unit_interval(s in arb_scenario()) {
                let report = delivery_report(&s);
                for value in [report.s_h, report.xi_p, report.s_p, report.s, report.mdp] {
                    prop_assert!((0.0..=1.0).contains(&value), "value {value} out of range");
                }
                prop_assert!(report.ee >= 0.0);
                // A single frame's delivery is capped by its header success;
                // frame replication escapes the cap by sending fresh headers.
                if s.scheme != SchemeKind::Frame {
                    prop_assert!(report.mdp <= report.s_h + 1e-15);
                }
            }

            // More nodes never helps delivery.
            #[test]
            fn mdp_non_increasing_in_nodes(s in arb_scenario()) {
                let mut denser = s.clone();
                denser.n_nodes = s.n_nodes * 2;
                prop_assert!(mdp(&denser) <= mdp(&s) + 1e-12);
            }

            // More replicas never hurts delivery.
            #[test]
            fn mdp_non_decreasing_in_replicas(s in arb_scenario()) {
                if s.scheme == SchemeKind::None {
                    return Ok(());
                }
                let mut more = s.clone();
                more.replicas = s.replicas + 1;
                prop_assert!(mdp(&more) >= mdp(&s) - 1e-12);
            }

            // OR-combining never lowers the fragment success probability.
            #[test]
            fn combining_improves_fragments(xi in 0.0f64..=1.0, r in 1u32..6) {
                let combined = replica_fragment_success(xi, r);
                prop_assert!(combined >= xi - 1e-15);
                prop_assert!((0.0..=1.0).contains(&combined));
                if r == 1 {
                    prop_assert_eq!(combined, xi);
                }
            }
        }
    }
}
