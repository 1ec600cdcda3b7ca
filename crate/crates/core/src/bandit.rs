//! Linear contextual Thompson sampling over jamming actions.
//!
//! Each action keeps a three-element context built from the costs it has
//! produced: mean cost, share of costs above the success threshold `tau`,
//! and the largest cost seen. Expected cost is modeled as `<phi, theta>`
//! with a Gaussian posterior over `theta`; every step draws `theta` from the
//! posterior and plays the action with the largest predicted cost (higher
//! cost means more disruption of the victim).

use nalgebra::{Matrix3, Vector3};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::ModulationScheme;
use crate::jammer::{JammerAction, JammingMethod};

pub type Context = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    actions: Vec<JammerAction>,
    m: usize,
}

impl ActionSpace {
    pub fn actions(&self) -> &[JammerAction] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize) -> &JammerAction {
        &self.actions[i]
    }

    pub fn index_of(&self, action: &JammerAction) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }
}

/// `rho` grid `1/m, 2/m, ..., 1`.
pub fn rho_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|i| i as f64 / m as f64).collect()
}

/// Cartesian product scheme x rho x method, schemes outermost.
pub fn enumerate_actions(
    schemes: &[ModulationScheme],
    m: usize,
    methods: &[JammingMethod],
) -> Result<ActionSpace> {
    if schemes.is_empty() || methods.is_empty() || m == 0 {
        return invalid("action space needs schemes, methods and m >= 1");
    }
    let mut actions = Vec::with_capacity(schemes.len() * m * methods.len());
    for &scheme in schemes {
        for rho in rho_grid(m) {
            for &method in methods {
                actions.push(JammerAction::new(scheme, rho, method)?);
            }
        }
    }
    Ok(ActionSpace { actions, m })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub bler_target: f64,
    pub jnr_db: f64,
    pub tau: f64,
}

/// `max(bler - target, 0) / JNR` with JNR in linear units.
pub fn compute_cost(bler: f64, params: &CostParams) -> f64 {
    (bler - params.bler_target).max(0.0) / 10f64.powf(params.jnr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionStats {
    pub plays: u64,
    pub cost_sum: f64,
    pub exceed_count: u64,
    pub cost_max: f64,
}

impl ActionStats {
    pub fn context(&self) -> Context {
        if self.plays == 0 {
            return [0.0; 3];
        }
        let n = self.plays as f64;
        [self.cost_sum / n, self.exceed_count as f64 / n, self.cost_max]
    }

    pub fn record(&mut self, cost: f64, tau: f64) {
        self.cost_max = if self.plays == 0 {
            cost
        } else {
            self.cost_max.max(cost)
        };
        self.plays += 1;
        self.cost_sum += cost;
        if cost > tau {
            self.exceed_count += 1;
        }
    }
}

pub fn update_context(stats: &ActionStats, new_cost: f64, tau: f64) -> ActionStats {
    let mut next = *stats;
    next.record(new_cost, tau);
    next
}

/// Gaussian posterior `theta ~ N(theta_hat, B^-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub theta_hat: [f64; 3],
    /// Precision matrix, row-major.
    pub b: [[f64; 3]; 3],
    pub obs_noise_var: f64,
}

impl Default for Posterior {
    fn default() -> Self {
        Posterior::new(1.0)
    }
}

impl Posterior {
    /// `theta_hat = 0`, `B = I`.
    pub fn new(obs_noise_var: f64) -> Self {
        Posterior {
            theta_hat: [0.0; 3],
            b: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            obs_noise_var,
        }
    }

    pub fn precision(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.b[r][c])
    }

    pub fn mean(&self) -> Vector3<f64> {
        Vector3::from(self.theta_hat)
    }

    fn set(&mut self, b: &Matrix3<f64>, theta: &Vector3<f64>) {
        for r in 0..3 {
            for c in 0..3 {
                self.b[r][c] = b[(r, c)];
            }
        }
        self.theta_hat = [theta[0], theta[1], theta[2]];
    }
}

/// One draw of `theta` from the posterior.
pub fn sample_theta<R: Rng + ?Sized>(post: &Posterior, rng: &mut R) -> Result<[f64; 3]> {
    let cov = post
        .precision()
        .try_inverse()
        .ok_or_else(|| Error::Invariant("posterior precision is singular".into()))?;
    let chol = cov
        .symmetric_part()
        .cholesky()
        .ok_or_else(|| Error::Invariant("posterior covariance is not positive definite".into()))?;
    let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let draw = post.mean() + chol.l() * z;
    Ok([draw[0], draw[1], draw[2]])
}

#[inline]
fn dot(a: &Context, b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Scores this close (relative) count as ties; running means of equal
/// costs differ in the last bits.
const TIE_TOLERANCE: f64 = 1e-12;

/// Index maximizing `<phi_i, theta>`; ties are broken uniformly.
pub fn select_action<R: Rng + ?Sized>(stats: &[ActionStats], theta: &[f64; 3], rng: &mut R) -> usize {
    let scores: Vec<f64> = stats.iter().map(|s| dot(&s.context(), theta)).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOLERANCE * best.abs().max(f64::MIN_POSITIVE);
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= best - slack).collect();
    *ties.choose(rng).expect("select_action needs at least one action")
}

/// Bayesian linear regression update with feature `phi` and target `cost`.
pub fn update_posterior(post: &mut Posterior, phi: &Context, cost: f64) -> Result<()> {
    if phi.iter().all(|&x| x == 0.0) {
        return Ok(());
    }
    let b = post.precision();
    let phi = Vector3::from(*phi);
    let s2 = post.obs_noise_var;
    let b_next = b + phi * phi.transpose() / s2;
    let rhs = b * post.mean() + phi * (cost / s2);
    let theta = b_next
        .cholesky()
        .ok_or_else(|| Error::Invariant("posterior precision lost definiteness".into()))?
        .solve(&rhs);
    post.set(&b_next, &theta);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub action: usize,
    pub bler: f64,
    pub cost: f64,
}

/// Agent state: action stats, posterior and cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    space: ActionSpace,
    stats: Vec<ActionStats>,
    posterior: Posterior,
    params: CostParams,
}

impl Agent {
    pub fn new(space: ActionSpace, params: CostParams, obs_noise_var: f64) -> Result<Self> {
        if obs_noise_var.is_nan() || obs_noise_var <= 0.0 {
            return invalid("observation noise variance must be positive");
        }
        if params.tau < 0.0 {
            return invalid("tau must be nonnegative");
        }
        let stats = vec![ActionStats::default(); space.len()];
        Ok(Agent {
            space,
            stats,
            posterior: Posterior::new(obs_noise_var),
            params,
        })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn stats(&self) -> &[ActionStats] {
        &self.stats
    }

    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn params(&self) -> &CostParams {
        &self.params
    }

    /// Draw `theta` and pick an action.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let theta = sample_theta(&self.posterior, rng)?;
        Ok(select_action(&self.stats, &theta, rng))
    }

    /// Feed back the BLER observed after playing `action`. The posterior
    /// regresses the cost on the context the action had before this play.
    pub fn learn(&mut self, action: usize, bler: f64) -> Result<f64> {
        let cost = compute_cost(bler, &self.params);
        let phi = self.stats[action].context();
        update_posterior(&mut self.posterior, &phi, cost)?;
        self.stats[action].record(cost, self.params.tau);
        Ok(cost)
    }

    pub fn step<R, F>(&mut self, rng: &mut R, mut env: F) -> Result<StepOutcome>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &JammerAction) -> Result<f64>,
    {
        let action = self.choose(rng)?;
        let bler = env(action, self.space.get(action))?;
        let cost = self.learn(action, bler)?;
        Ok(StepOutcome { action, bler, cost })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let agent: Agent = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if agent.stats.len() != agent.space.len() {
            return invalid("snapshot has mismatched stats and actions");
        }
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn space150() -> ActionSpace {
        enumerate_actions(&ModulationScheme::JAMMING, 10, &JammingMethod::SLOT).unwrap()
    }

    fn params() -> CostParams {
        CostParams {
            bler_target: 0.0,
            jnr_db: 0.0,
            tau: 0.5,
        }
    }

    #[test]
    fn enumeration() {
        let s = space150();
        assert_eq!(s.len(), 150);
        assert_eq!(s, space150());
        assert!(s.actions().iter().all(|a| a.rho > 0.0 && a.rho <= 1.0));
        let one = enumerate_actions(&[ModulationScheme::Bpsk], 1, &[JammingMethod::Dmrs]).unwrap();
        assert_eq!(one.get(0).rho, 1.0);
        assert!(enumerate_actions(&[], 3, &[JammingMethod::Dmrs]).is_err());
        assert!(enumerate_actions(&[ModulationScheme::Bpsk], 0, &[JammingMethod::Dmrs]).is_err());
        assert_eq!(s.index_of(s.get(37)), Some(37));
    }

    #[test]
    fn cost_examples() {
        let p = CostParams {
            bler_target: 0.1,
            jnr_db: 10.0,
            tau: 0.5,
        };
        assert!((compute_cost(0.5, &p) - 0.04).abs() < 1e-12);
        assert_eq!(compute_cost(0.05, &p), 0.0);
        assert_eq!(compute_cost(1.0, &params()), 1.0);
    }

    #[test]
    fn context_examples() {
        let s = update_context(&ActionStats::default(), 0.6, 0.5);
        assert_eq!(s.context(), [0.6, 1.0, 0.6]);
        let s = update_context(&s, 0.2, 0.5);
        let c = s.context();
        assert!((c[0] - 0.4).abs() < 1e-12 && c[1] == 0.5 && c[2] == 0.6);
    }

    #[test]
    fn context_of_uniform_costs() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut s = ActionStats::default();
        for _ in 0..1000 {
            s.record(rng.random::<f64>(), 0.5);
        }
        let c = s.context();
        assert!((c[0] - 0.5).abs() < 0.05 && (c[1] - 0.5).abs() < 0.05 && c[2] > 0.95);
    }

    #[test]
    fn concentrated_posterior_samples_near_mean() {
        let mut post = Posterior::new(1.0);
        post.theta_hat = [0.3, -1.0, 2.0];
        post.b = [[1e6, 0.0, 0.0], [0.0, 1e6, 0.0], [0.0, 0.0, 1e6]];
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..100 {
            let t = sample_theta(&post, &mut rng).unwrap();
            for (ti, hi) in t.iter().zip(&post.theta_hat) {
                assert!((ti - hi).abs() < 0.01);
            }
        }
    }

    #[test]
    fn sample_moments() {
        let mut post = Posterior::new(1.0);
        post.theta_hat = [1.0, -0.5, 0.25];
        post.b = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 4.0]];
        let mut rng = SimRng::seed_from_u64(3);
        let n = 100_000;
        let draws: Vec<[f64; 3]> = (0..n).map(|_| sample_theta(&post, &mut rng).unwrap()).collect();
        let cov_true = [1.0, 0.5, 0.25];
        for i in 0..3 {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
            let se = (cov_true[i] / n as f64).sqrt();
            assert!((mean - post.theta_hat[i]).abs() < 3.0 * se);
            for j in 0..3 {
                let mj = post.theta_hat[j];
                let c = draws
                    .iter()
                    .map(|d| (d[i] - post.theta_hat[i]) * (d[j] - mj))
                    .sum::<f64>()
                    / n as f64;
                if i == j {
                    assert!((c / cov_true[i] - 1.0).abs() < 0.05, "{i} {c}");
                } else {
                    assert!(c.abs() < 0.02);
                }
            }
        }
    }

    #[test]
    fn singular_precision_is_an_invariant_error() {
        let mut post = Posterior::new(1.0);
        post.b = [[0.0; 3]; 3];
        let mut rng = SimRng::seed_from_u64(4);
        assert!(matches!(sample_theta(&post, &mut rng), Err(Error::Invariant(_))));
    }

    #[test]
    fn selection_rules() {
        let mut rng = SimRng::seed_from_u64(5);
        let mut stats = vec![ActionStats::default(); 10];
        let mut hits = [0usize; 10];
        for _ in 0..5000 {
            hits[select_action(&stats, &[1.0, -2.0, 0.5], &mut rng)] += 1;
        }
        assert!(hits.iter().all(|&h| h > 350 && h < 650), "{hits:?}");
        stats[6] = ActionStats {
            plays: 1,
            cost_sum: 1.0,
            exceed_count: 1,
            cost_max: 1.0,
        };
        assert_eq!(select_action(&stats, &[1.0, 1.0, 1.0], &mut rng), 6);
        assert_eq!(select_action(&stats, &[7.0, 7.0, 7.0], &mut rng), 6);
    }

    #[test]
    fn zero_feature_leaves_posterior_unchanged() {
        let mut post = Posterior::new(1.0);
        post.theta_hat = [0.1, 0.2, 0.3];
        let before = post.clone();
        update_posterior(&mut post, &[0.0; 3], 5.0).unwrap();
        assert_eq!(post, before);
    }

    #[test]
    fn repeated_updates_match_ridge_oracle() {
        let mut post = Posterior::new(1.0);
        for _ in 0..10_000 {
            update_posterior(&mut post, &[1.0, 0.0, 0.0], 0.3).unwrap();
        }
        // ridge with unit prior: theta_0 = n c / (1 + n)
        let oracle = 10_000.0 * 0.3 / 10_001.0;
        assert!((post.theta_hat[0] - oracle).abs() < 1e-9);
        assert!((post.theta_hat[0] - 0.3).abs() < 0.01);
        assert_eq!(&post.theta_hat[1..], &[0.0, 0.0]);
    }

    #[test]
    fn batch_oracle_for_mixed_features() {
        let mut rng = SimRng::seed_from_u64(6);
        let mut post = Posterior::new(0.5);
        let mut xtx = Matrix3::<f64>::identity();
        let mut xty = Vector3::<f64>::zeros();
        for _ in 0..200 {
            let phi = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let c = rng.random::<f64>();
            update_posterior(&mut post, &phi, c).unwrap();
            let v = Vector3::from(phi);
            xtx += v * v.transpose() / 0.5;
            xty += v * c / 0.5;
        }
        let oracle = xtx.try_inverse().unwrap() * xty;
        for i in 0..3 {
            assert!((post.theta_hat[i] - oracle[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn learns_the_single_good_action() {
        let mut rng = SimRng::seed_from_u64(7);
        let mut agent = Agent::new(space150(), params(), 1.0).unwrap();
        let mut tail = 0;
        for t in 0..2000 {
            let out = agent
                .step(&mut rng, |i, _| Ok(if i == 0 { 1.0 } else { 0.0 }))
                .unwrap();
            if t >= 1800 && out.action == 0 {
                tail += 1;
            }
        }
        assert!(tail >= 160, "{tail}");
    }

    // Exploration lasts while sampled theta can still point away from the
    // played contexts, so small costs keep it going long enough to visit
    // every action.
    #[test]
    fn constant_environment_spreads_play() {
        let mut rng = SimRng::seed_from_u64(8);
        let mut agent = Agent::new(space150(), params(), 1.0).unwrap();
        let mut counts = vec![0usize; 150];
        for t in 0..2000 {
            let out = agent.step(&mut rng, |_, _| Ok(0.05)).unwrap();
            if t >= 1500 {
                counts[out.action] += 1;
            }
        }
        let cap = 3.0 * 500.0 / 150.0;
        assert!(
            counts.iter().all(|&c| c as f64 <= cap),
            "{:?}",
            counts.iter().max()
        );
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rng = SimRng::seed_from_u64(9);
        let mut agent = Agent::new(space150(), params(), 1.0).unwrap();
        for _ in 0..20 {
            agent.step(&mut rng, |i, _| Ok((i % 7) as f64 / 7.0)).unwrap();
        }
        let back = Agent::from_json(&agent.to_json().unwrap()).unwrap();
        assert_eq!(back, agent);
        assert!(Agent::from_json("{").is_err());
    }
}
