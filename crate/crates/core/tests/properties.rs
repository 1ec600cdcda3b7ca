//! Property tests over randomized inputs.

use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use linjam::bandit::{enumerate_actions, ActionStats, Agent, CostParams};
use linjam::channel::ChannelConfig;
use linjam::fec::{ldpc_decode, LdpcCode, LlrBlock};
use linjam::feedback::{observe_bler, FeedbackConfig};
use linjam::grid::{ModulationScheme, OfdmConfig, OfdmModem, ReRole, ResourceGrid};
use linjam::harness::stats::cumulative_average;
use linjam::jammer::{generate_jamming_grid, make_mask, JammerAction, JammingMethod};
use linjam::rng::SimRng;
use linjam::C64;

fn sorted_eigenvalues(b: &[[f64; 3]; 3]) -> [f64; 3] {
    let m = Matrix3::from_fn(|i, j| b[i][j]);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_holds_outside_the_cyclic_prefix(seed in any::<u64>(), symbols in 1usize..4) {
        let cfg = OfdmConfig::coded_ofdm(symbols);
        let roles = cfg.role_matrix(symbols);
        let modem = OfdmModem::new(cfg.clone()).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let cells: Vec<C64> = roles
            .as_slice()
            .iter()
            .map(|&r| {
                if r == ReRole::Data {
                    C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let grid = ResourceGrid::from_parts(cells, roles.clone()).unwrap();
        let samples = modem.modulate(&grid).unwrap();
        let mut offset = 0;
        let mut energy = 0.0;
        for sym in 0..symbols {
            offset += cfg.cp_len(sym);
            energy += samples[offset..offset + cfg.n_sc].iter().map(|s| s.norm_sqr()).sum::<f64>();
            offset += cfg.n_sc;
        }
        prop_assert_eq!(offset, samples.len());
        prop_assert!((energy - grid.energy()).abs() <= 1e-9 * grid.energy());

        let back = modem.demodulate(&samples, &roles).unwrap();
        for (i, (a, b)) in back.cells().iter().zip(grid.cells()).enumerate() {
            match roles.as_slice()[i] {
                ReRole::Guard | ReRole::Null => prop_assert_eq!(*a, C64::new(0.0, 0.0)),
                _ => prop_assert!((a - b).norm() < 1e-9),
            }
        }
    }

    #[test]
    fn masks_follow_their_method(seed in any::<u64>(), rho in 0.05f64..=1.0) {
        let cfg = OfdmConfig::coded_ofdm(6);
        let roles = cfg.role_matrix(6);
        let (n_sc, n_sym) = (roles.n_sc(), roles.n_symbols());
        let data = |sc: usize, sym: usize| roles.get(sc, sym) == ReRole::Data;
        let mut rng = SimRng::seed_from_u64(seed);

        let m = make_mask(JammingMethod::Symbol, rho, &roles, &mut rng);
        for sym in 0..n_sym {
            let on: Vec<bool> = (0..n_sc).filter(|&sc| data(sc, sym)).map(|sc| m[roles.index(sc, sym)]).collect();
            prop_assert!(on.iter().all(|&x| x == on[0]));
        }
        let m = make_mask(JammingMethod::Subcarrier, rho, &roles, &mut rng);
        for sc in 0..n_sc {
            let on: Vec<bool> = (0..n_sym).filter(|&sym| data(sc, sym)).map(|sym| m[roles.index(sc, sym)]).collect();
            prop_assert!(on.iter().all(|&x| x == on[0]));
        }
        for method in JammingMethod::ALL {
            let m = make_mask(method, rho, &roles, &mut rng);
            for (&on, &role) in m.iter().zip(roles.as_slice()) {
                prop_assert!(!on || method.eligible(role));
            }
        }
    }

    #[test]
    fn jamming_grids_respect_roles(seed in any::<u64>(), rho in 0.05f64..=1.0, jnr in -5.0f64..15.0) {
        let cfg = OfdmConfig::coded_ofdm(4);
        let roles = cfg.role_matrix(4);
        let chan = ChannelConfig::new(10.0, jnr);
        let mut rng = SimRng::seed_from_u64(seed);
        for method in JammingMethod::CODED_OFDM {
            let a = JammerAction::new(ModulationScheme::Qpsk, rho, method).unwrap();
            let g = generate_jamming_grid(&a, &chan, &roles, &mut rng).unwrap();
            for (c, &role) in g.cells().iter().zip(roles.as_slice()) {
                prop_assert!(c.re.is_finite() && c.im.is_finite());
                if !method.eligible(role) {
                    prop_assert_eq!(*c, C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn agent_state_is_recomputable(seed in any::<u64>(), steps in 1usize..80, tau in 0.0f64..0.6) {
        let space = enumerate_actions(&[ModulationScheme::Awgn, ModulationScheme::Bpsk], 4, &JammingMethod::SLOT).unwrap();
        let params = CostParams { bler_target: 0.05, jnr_db: 3.0, tau };
        let mut agent = Agent::new(space.clone(), params, 1.0).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let mut history: Vec<(usize, f64)> = Vec::new();
        let mut eig = sorted_eigenvalues(&agent.posterior().b);
        for _ in 0..steps {
            let out = agent.step(&mut rng, |i, _| Ok(((i * 7) % 11) as f64 / 10.0 * 0.9)).unwrap();
            history.push((out.action, out.cost));

            let next = sorted_eigenvalues(&agent.posterior().b);
            for (a, b) in eig.iter().zip(&next) {
                prop_assert!(*b >= *a - 1e-9 * a.abs().max(1.0));
            }
            eig = next;

            for (i, stats) in agent.stats().iter().enumerate() {
                let costs: Vec<f64> = history.iter().filter(|h| h.0 == i).map(|h| h.1).collect();
                if costs.is_empty() {
                    prop_assert_eq!(*stats, ActionStats::default());
                    prop_assert_eq!(stats.context(), [0.0; 3]);
                    continue;
                }
                let n = costs.len() as f64;
                let mean = costs.iter().sum::<f64>() / n;
                let frac = costs.iter().filter(|&&c| c > tau).count() as f64 / n;
                let max = costs.iter().cloned().fold(f64::MIN, f64::max);
                let ctx = stats.context();
                prop_assert!((ctx[0] - mean).abs() < 1e-12);
                prop_assert!((ctx[1] - frac).abs() < 1e-12);
                prop_assert_eq!(ctx[2], max);
            }
        }
    }

    #[test]
    fn cumulative_average_is_prefix_mean(series in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let cum = cumulative_average(&series).unwrap();
        prop_assert_eq!(cum.len(), series.len());
        for (t, &c) in cum.iter().enumerate() {
            let mean = series[..=t].iter().sum::<f64>() / (t + 1) as f64;
            prop_assert!((c - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn observed_bler_is_a_fraction(acks in prop::collection::vec(any::<bool>(), 1..300), lambda in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = SimRng::seed_from_u64(seed);
        let b = observe_bler(&acks, &FeedbackConfig::symmetric(lambda), &mut rng).unwrap().unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        if lambda == 0.0 {
            let nacks = acks.iter().filter(|&&a| !a).count();
            prop_assert_eq!(b, nacks as f64 / acks.len() as f64);
        }
    }

    #[test]
    fn decoder_success_implies_zero_syndrome(seed in any::<u64>(), sigma in 0.4f64..1.4) {
        let code = LdpcCode::coded_ofdm_default();
        let mut rng = SimRng::seed_from_u64(seed);
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = code.encode(&info).unwrap();
        prop_assert!(code.syndrome_ok(&cw));
        let llrs: Vec<f64> = cw
            .iter()
            .map(|&b| {
                let y = 1.0 - 2.0 * b as f64 + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                2.0 * y / (sigma * sigma)
            })
            .collect();
        let out = ldpc_decode(&LlrBlock::new(llrs).unwrap(), &code, 25);
        prop_assert_eq!(out.bits.len(), code.n());
        if out.success {
            prop_assert!(code.syndrome_ok(&out.bits));
        }
    }
}
