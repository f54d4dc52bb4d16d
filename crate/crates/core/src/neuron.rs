//! Leaky integrate-and-fire output neurons with adaptive thresholds and a
//! winner-take-all firing rule.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifNeuron {
    /// Accumulated dendrite signal; never negative.
    pub integration: f64,
    pub threshold: f64,
    pub fired_count: u64,
}

impl LifNeuron {
    pub fn at_rest(params: &NeuronParams) -> Self {
        LifNeuron {
            integration: 0.0,
            threshold: params.theta0,
            fired_count: 0,
        }
    }

    /// One clock cycle of geometric leak plus input, floored at zero.
    pub fn integrate_step(&mut self, dendrite_output: f64, params: &NeuronParams) {
        self.integration = (self.integration * (1.0 - params.leak_alpha) + dendrite_output).max(0.0);
    }

    pub fn margin(&self) -> f64 {
        self.integration - self.threshold
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronParams {
    /// Fraction of the integration lost per clock cycle.
    pub leak_alpha: f64,
    /// Baseline threshold.
    pub theta0: f64,
    /// Threshold increase for the neuron that fired.
    pub homeo_bump: f64,
    /// Fraction of `threshold - theta0` removed per presentation.
    pub homeo_decay: f64,
    pub threshold_floor: f64,
}

impl NeuronParams {
    /// Defaults with bump and floor scaled to `theta0`.
    pub fn with_theta0(theta0: f64) -> Self {
        NeuronParams {
            leak_alpha: 0.05,
            theta0,
            homeo_bump: 0.15 * theta0,
            homeo_decay: 0.02,
            threshold_floor: 0.1 * theta0,
        }
    }

    /// Baseline threshold for dataset-scale arrays: half the per-cycle output
    /// of a half-matching image, i.e. a typical image (`mean_active` input
    /// ones) whose row has parallel synapses under half of its active pixels.
    /// Keeps time-to-fire roughly independent of array size and ink density.
    pub fn scaled_theta0(mean_active: f64, r: usize, g_ap: f64, ratio_rho: f64) -> f64 {
        let half_match = (mean_active / 2.0) * r as f64 * g_ap * (ratio_rho - 1.0) / 2.0;
        0.5 * half_match
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::config("neuron", m));
        if !(0.0..=1.0).contains(&self.leak_alpha) {
            return err(format!("leak_alpha must be in [0, 1], got {}", self.leak_alpha));
        }
        if !(0.0..=1.0).contains(&self.homeo_decay) {
            return err(format!("homeo_decay must be in [0, 1], got {}", self.homeo_decay));
        }
        if !(self.threshold_floor > 0.0 && self.theta0 > self.threshold_floor && self.theta0.is_finite()) {
            return err(format!(
                "need theta0 > threshold_floor > 0, got theta0={} threshold_floor={}",
                self.theta0, self.threshold_floor
            ));
        }
        if !(self.homeo_bump >= 0.0 && self.homeo_bump.is_finite()) {
            return err(format!("homeo_bump must be >= 0, got {}", self.homeo_bump));
        }
        Ok(())
    }
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams::with_theta0(1.0)
    }
}

/// Index of the neuron with the largest supra-threshold margin; ties go to
/// the lowest index. `None` if no neuron is above threshold.
pub fn select_winner(neurons: &[LifNeuron]) -> Result<Option<usize>> {
    if neurons.is_empty() {
        return Err(Error::argument("select_winner on an empty neuron list"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, n) in neurons.iter().enumerate() {
        if n.integration > n.threshold {
            let m = n.margin();
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((i, m));
            }
        }
    }
    Ok(best.map(|(i, _)| i))
}

/// Zero every neuron's integration after a fire.
pub fn post_fire_reset(neurons: &mut [LifNeuron]) {
    for n in neurons {
        n.integration = 0.0;
    }
}

/// Bump the winner's threshold, then relax every threshold toward `theta0`.
pub fn homeostasis_update(neurons: &mut [LifNeuron], winner: Option<usize>, params: &NeuronParams) -> Result<()> {
    if let Some(w) = winner {
        let n = neurons.len();
        neurons
            .get_mut(w)
            .ok_or_else(|| Error::argument(format!("winner {w} out of range ({n} neurons)")))?
            .threshold += params.homeo_bump;
    }
    for n in neurons.iter_mut() {
        n.threshold = (params.theta0 + (n.threshold - params.theta0) * (1.0 - params.homeo_decay))
            .max(params.threshold_floor);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn neurons(integrations: &[f64], thresholds: &[f64]) -> Vec<LifNeuron> {
        integrations
            .iter()
            .zip(thresholds)
            .map(|(&integration, &threshold)| LifNeuron {
                integration,
                threshold,
                fired_count: 0,
            })
            .collect()
    }

    #[test]
    fn integrate_examples() {
        let p = NeuronParams::default();
        let mut n = LifNeuron::at_rest(&p);
        n.integrate_step(0.9, &p);
        assert_eq!(n.integration, 0.9);
        n.integration = 1.0;
        n.integrate_step(0.0, &p);
        assert!((n.integration - 0.95).abs() < 1e-15);
        let no_leak = NeuronParams { leak_alpha: 0.0, ..p };
        n.integration = 0.5;
        n.integrate_step(-0.9, &no_leak);
        assert_eq!(n.integration, 0.0);
    }

    #[test]
    fn winner_examples() {
        let t = [1.0, 1.0];
        assert_eq!(select_winner(&neurons(&[1.2, 0.8], &t)).unwrap(), Some(0));
        assert_eq!(select_winner(&neurons(&[1.2, 1.5], &t)).unwrap(), Some(1));
        assert_eq!(select_winner(&neurons(&[0.5, 0.5], &t)).unwrap(), None);
        // exactly at threshold does not fire
        assert_eq!(select_winner(&neurons(&[1.0], &[1.0])).unwrap(), None);
        assert_eq!(select_winner(&neurons(&[1.5, 2.0, 2.0], &[1.0, 1.5, 1.5])).unwrap(), Some(0));
        assert!(select_winner(&[]).is_err());
    }

    #[test]
    fn reset_examples() {
        let mut ns = neurons(&[1.2, 0.8], &[1.0, 1.0]);
        post_fire_reset(&mut ns);
        assert!(ns.iter().all(|n| n.integration == 0.0));
        post_fire_reset(&mut ns);
        assert!(ns.iter().all(|n| n.integration == 0.0));
        let mut one = neurons(&[5.0], &[1.0]);
        post_fire_reset(&mut one);
        assert_eq!(one[0].integration, 0.0);
    }

    #[test]
    fn homeostasis_examples() {
        let p = NeuronParams {
            homeo_decay: 0.0,
            ..NeuronParams::default()
        };
        let mut ns = neurons(&[0.0, 0.0], &[1.0, 1.0]);
        homeostasis_update(&mut ns, Some(0), &p).unwrap();
        assert!((ns[0].threshold - 1.15).abs() < 1e-15);
        assert_eq!(ns[1].threshold, 1.0);

        let p = NeuronParams::default();
        let mut ns = neurons(&[0.0, 0.0], &[1.15, 1.0]);
        homeostasis_update(&mut ns, None, &p).unwrap();
        assert!((ns[0].threshold - 1.147).abs() < 1e-12);
        assert_eq!(ns[1].threshold, 1.0);

        assert!(homeostasis_update(&mut ns, Some(2), &p).is_err());
    }

    #[test]
    fn scaled_theta0_examples() {
        assert!((NeuronParams::scaled_theta0(100.0, 1, 1.0, 1.9) - 11.25).abs() < 1e-12);
        assert!((NeuronParams::scaled_theta0(100.0, 4, 1.0, 1.9) - 45.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(NeuronParams::default().validate().is_ok());
        for bad in [
            NeuronParams { leak_alpha: 1.5, ..NeuronParams::default() },
            NeuronParams { homeo_decay: -0.1, ..NeuronParams::default() },
            NeuronParams { threshold_floor: 2.0, ..NeuronParams::default() },
            NeuronParams { threshold_floor: 0.0, ..NeuronParams::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config { owner: "neuron", .. })));
        }
    }

    #[derive(Debug, Clone)]
    enum Step {
        Integrate(f64),
        Fire(usize),
        Decay,
    }

    fn steps() -> impl Strategy<Value = Vec<Step>> {
        proptest::collection::vec(
            prop_oneof![
                (-5.0..5.0f64).prop_map(Step::Integrate),
                (0usize..4).prop_map(Step::Fire),
                Just(Step::Decay),
            ],
            0..200,
        )
    }

    proptest! {
        #[test]
        fn state_bounds_hold(seq in steps(), decay in 0.0..=1.0f64, bump in 0.0..1.0f64) {
            let p = NeuronParams { homeo_decay: decay, homeo_bump: bump, ..NeuronParams::default() };
            let mut ns = vec![LifNeuron::at_rest(&p); 4];
            for s in seq {
                match s {
                    Step::Integrate(x) => ns.iter_mut().for_each(|n| n.integrate_step(x, &p)),
                    Step::Fire(w) => {
                        post_fire_reset(&mut ns);
                        homeostasis_update(&mut ns, Some(w), &p).unwrap();
                    }
                    Step::Decay => homeostasis_update(&mut ns, None, &p).unwrap(),
                }
                for n in &ns {
                    prop_assert!(n.integration >= 0.0);
                    prop_assert!(n.threshold >= p.threshold_floor);
                }
            }
        }

        #[test]
        fn threshold_nondecreasing_without_decay(fires in proptest::collection::vec(proptest::option::of(0usize..3), 0..100)) {
            let p = NeuronParams { homeo_decay: 0.0, ..NeuronParams::default() };
            let mut ns = vec![LifNeuron::at_rest(&p); 3];
            for w in fires {
                let before: Vec<f64> = ns.iter().map(|n| n.threshold).collect();
                homeostasis_update(&mut ns, w, &p).unwrap();
                for (b, n) in before.iter().zip(&ns) {
                    prop_assert!(n.threshold >= *b);
                }
            }
        }

        #[test]
        fn winner_is_permutation_invariant(
            vals in proptest::collection::vec((0.0..3.0f64, 0.5..2.0f64), 1..12),
            seed in any::<u64>(),
        ) {
            let ns: Vec<LifNeuron> = vals.iter().map(|&(i, t)| LifNeuron { integration: i, threshold: t, fired_count: 0 }).collect();
            let mut perm: Vec<usize> = (0..ns.len()).collect();
            let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Order, 0, 0);
            perm = crate::rng::permutation(perm.len(), &mut rng).into_iter().map(|i| perm[i]).collect();
            let shuffled: Vec<LifNeuron> = perm.iter().map(|&i| ns[i]).collect();
            let a = select_winner(&ns).unwrap();
            let b = select_winner(&shuffled).unwrap().map(|i| perm[i]);
            match (a, b) {
                (None, None) => {}
                (Some(x), Some(y)) => prop_assert_eq!(ns[x].margin(), ns[y].margin()),
                _ => prop_assert!(false, "winner presence differs"),
            }
        }

        #[test]
        fn duplicate_margins_resolve_to_lowest_index(n in 2usize..10, k in 0usize..10) {
            let k = k % n;
            let mut ns = vec![LifNeuron { integration: 0.5, threshold: 1.0, fired_count: 0 }; n];
            for n in ns.iter_mut().skip(k) {
                n.integration = 1.7;
            }
            prop_assert_eq!(select_winner(&ns).unwrap(), Some(k));
        }
    }
}
