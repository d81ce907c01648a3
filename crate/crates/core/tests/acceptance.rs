//! Acceptance gate: one test per exit criterion, each printing a single
//! PASS/FAIL line (run with --nocapture to see them). The learning-based
//! ordering checks load cached actor checkpoints from `checkpoints/` at the
//! workspace root and train them in place when absent; training is a pure
//! function of (config, seed), so the cached artifacts are reproducible.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use mbcadrt::config::RunConfig;
use mbcadrt::ddpg::{
    train_agent, AgentNets, DdpgHyper, DdpgLearner, Environment, ReplayBuffer,
};
use mbcadrt::eval::{
    error_2norm, metrics_csv, rollout, run_comparison, scenario_by_name, trajectory_csv,
    CheckpointStore, RunResult, Variant,
};
use mbcadrt::lmdp::{train, EnvState, HybridEnv, Scenario, OBS_DIM};
use mbcadrt::mbc::{closed_loop_matrix, synthesize, ControllerSS};
use mbcadrt::nn::{
    grad_check, Network, NetworkSpec, OutputActivation, RecurrentKind,
};
use mbcadrt::numerics::{dare_solve, lqr_gain, spectral_radius};
use mbcadrt::plant::{
    linearize_nominal, mechanical_energy, reference, step, step_with_substeps, Excitation,
    PlantParams,
    PlantState, ReferenceProfile, SEGMENT_SWITCH_TIME,
};
use mbcadrt::{Matrix, SeededRng};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance [{criterion}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

fn nominal_controller(config: &RunConfig) -> ControllerSS {
    let nominal = linearize_nominal(&config.plant, config.env.dt);
    synthesize(&nominal, &config.synthesis_spec(&nominal)).unwrap()
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_gradient_exactness() {
    let start = Instant::now();
    let mut rng = SeededRng::new(41);
    let mut worst: f64 = 0.0;
    // Actor (bounded output) and critic (obs + action input, linear output).
    let specs = [
        NetworkSpec {
            input_dim: OBS_DIM,
            hidden: 64,
            output_dim: 1,
            recurrent: RecurrentKind::Lstm,
            output: OutputActivation::TanhScaled(20.0),
        },
        NetworkSpec {
            input_dim: OBS_DIM + 1,
            hidden: 64,
            output_dim: 1,
            recurrent: RecurrentKind::Lstm,
            output: OutputActivation::Identity,
        },
    ];
    for spec in specs {
        let net = Network::new(spec, &mut rng).unwrap();
        let xs: Vec<Matrix> = (0..5)
            .map(|_| {
                Matrix::from_vec(
                    3,
                    spec.input_dim,
                    (0..3 * spec.input_dim).map(|_| rng.gaussian()).collect(),
                )
            })
            .collect();
        worst = worst.max(grad_check(&net, &xs, 1e-5).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "1 gradient exactness",
        worst < 1e-4 && secs < 120.0,
        &format!("max relative error {worst:.3e}, {secs:.1} s"),
    );
}

// ---------------------------------------------------------------- criterion 2

fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
    // A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q
    let at_p = a.transpose().matmul(p);
    let at_p_a = at_p.matmul(a);
    let at_p_b = at_p.matmul(b);
    let gram = {
        let mut g = b.transpose().matmul(p).matmul(b);
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                g[(i, j)] += r[(i, j)];
            }
        }
        g
    };
    let correction = at_p_b.matmul(&gram.inverse().unwrap()).matmul(&at_p_b.transpose());
    let mut worst: f64 = 0.0;
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let res = at_p_a[(i, j)] - p[(i, j)] - correction[(i, j)] + q[(i, j)];
            worst = worst.max(res.abs());
        }
    }
    worst
}

#[test]
fn criterion_2_riccati_correctness() {
    let start = Instant::now();
    let mut rng = SeededRng::new(42);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = 4 + trial % 5;
        let m = 1 + trial % 2;
        let mut a = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.gaussian()).collect());
        // Scale to spectral radius 0.95: stable, hence trivially stabilizable.
        let rho = spectral_radius(&a);
        for v in a.data_mut() {
            *v *= 0.95 / rho;
        }
        let b = Matrix::from_vec(n, m, (0..n * m).map(|_| rng.gaussian()).collect());
        let q = {
            let g = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.gaussian()).collect());
            g.transpose().matmul(&g)
        };
        let r = {
            let mut r = Matrix::identity(m);
            for i in 0..m {
                r[(i, i)] = 0.5 + rng.uniform_range((0.0, 1.0));
            }
            r
        };
        let p = dare_solve(&a, &b, &q, &r).unwrap();
        worst = worst.max(dare_residual(&a, &b, &q, &r, &p));
    }
    // Scalar closed form: a = b = q = r = 1 gives p = (1 + sqrt 5) / 2.
    let one = Matrix::identity(1);
    let p = dare_solve(&one, &one, &one, &one).unwrap();
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let scalar_err = (p[(0, 0)] - golden).abs();
    let secs = start.elapsed().as_secs_f64();
    report(
        "2 Riccati correctness",
        worst < 1e-10 && scalar_err < 1e-12 && secs < 10.0,
        &format!("max residual {worst:.3e}, scalar error {scalar_err:.3e}, {secs:.1} s"),
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_plant_fidelity() {
    let start = Instant::now();
    let dt = 0.006;
    let mut p = PlantParams::default();
    p.delta = 0.0; // backlash disabled: the plant is exactly linear
    let (a, b1, b2, _c) = linearize_nominal(&p, dt);

    // Drive both integrators with the standard excitation and a bounded
    // control-like input over the full 667-step episode.
    let refs = ReferenceProfile::default();
    let excitation = Excitation {
        times: vec![0.0, SEGMENT_SWITCH_TIME],
        levels: vec![-3.96, 14.982],
    };
    let mut nonlinear = PlantState::default();
    let mut linear = vec![0.0; 6];
    let mut cumulative = 0.0;
    for k in 0..667 {
        let t = k as f64 * dt;
        let u = 5.0 * reference(t, &refs) / 0.03;
        let w = excitation.force(t);
        // Fine substepping keeps the integrator truncation error well
        // under the comparison tolerance across the stiff mesh mode.
        nonlinear = step_with_substeps(&nonlinear, u, w, &p, dt, 64).unwrap();
        let mut next = vec![0.0; 6];
        for i in 0..6 {
            let mut acc = b1[(i, 0)] * w + b2[(i, 0)] * u;
            for j in 0..6 {
                acc += a[(i, j)] * linear[j];
            }
            next[i] = acc;
        }
        linear = next;
        let nl = nonlinear.to_vec();
        cumulative += (0..6)
            .map(|i| (nl[i] - linear[i]).powi(2))
            .sum::<f64>()
            .sqrt();
    }

    // Free response dissipates: mechanical energy never increases.
    let mut s = PlantState {
        x_e: 0.01,
        v_e: 0.0,
        x_g: -0.002,
        v_g: 0.1,
        x_b: 0.004,
        v_b: -0.05,
    };
    let full = PlantParams::default();
    let mut energy = mechanical_energy(&s, &full);
    let mut monotone = true;
    for _ in 0..667 {
        s = step(&s, 0.0, 0.0, &full, dt).unwrap();
        let e = mechanical_energy(&s, &full);
        if e > energy + 1e-12 {
            monotone = false;
        }
        energy = e;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "3 plant fidelity",
        cumulative < 1e-6 && monotone && secs < 5.0,
        &format!("cumulative deviation {cumulative:.3e}, energy non-increasing: {monotone}, {secs:.1} s"),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_nominal_controller() {
    let start = Instant::now();
    let config = RunConfig::default();
    let ctrl = nominal_controller(&config);
    let nominal = linearize_nominal(&config.plant, config.env.dt);
    let rho = spectral_radius(&closed_loop_matrix(&nominal, &ctrl));

    let scenario = scenario_by_name("nominal").unwrap();
    let result = rollout(&scenario, Variant::OnlyMbc, &config, &ctrl, None, None).unwrap();
    let refs = scenario.reference();
    // Each reference segment must be tracked to 1% of its step size within
    // 1.5 s of the step.
    let seg1_band = 0.01 * refs.seg1.abs();
    let seg2_band = 0.01 * (refs.seg2 - refs.seg1).abs();
    let t1 = mbcadrt::eval::settling_time(&result.trajectory, 0.0, SEGMENT_SWITCH_TIME, seg1_band);
    let t2 = mbcadrt::eval::settling_time(
        &result.trajectory,
        SEGMENT_SWITCH_TIME,
        config.env.horizon as f64 * config.env.dt,
        seg2_band,
    );
    let ok1 = t1.map(|t| t < 1.5).unwrap_or(false);
    let ok2 = t2.map(|t| t - SEGMENT_SWITCH_TIME < 1.5).unwrap_or(false);
    let secs = start.elapsed().as_secs_f64();
    report(
        "4 nominal controller",
        rho < 1.0 && ok1 && ok2 && secs < 5.0,
        &format!(
            "closed-loop spectral radius {rho:.4}, settle {:?}/{:?} s, {secs:.1} s",
            t1, t2
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_markov_determinism() {
    let start = Instant::now();
    let config = RunConfig::default();
    let ctrl = nominal_controller(&config);
    let mut env = HybridEnv::new(
        config.env,
        config.domain,
        config.reward,
        config.scales,
        ctrl.clone(),
        false,
    );
    let mut rng = SeededRng::new(5);
    let mut all_bitwise = true;
    for i in 0..10_000 {
        // Fuzz a full environment state: plant, controller memory, episode
        // clock, integrator, and the frozen domain draw.
        let (params, refs) = config.domain.sample(&mut rng);
        let mut controller = ctrl.clone();
        for v in controller.x_c.iter_mut() {
            *v = 0.1 * rng.gaussian();
        }
        let state = EnvState {
            plant: PlantState {
                x_e: 0.01 * rng.gaussian(),
                v_e: 0.05 * rng.gaussian(),
                x_g: 0.01 * rng.gaussian(),
                v_g: 0.05 * rng.gaussian(),
                x_b: 0.01 * rng.gaussian(),
                v_b: 0.05 * rng.gaussian(),
            },
            controller,
            integral: 0.005 * rng.gaussian(),
            prev_error: if i % 3 == 0 {
                None
            } else {
                Some(0.01 * rng.gaussian())
            },
            k: rng.index(600),
            excitation: mbcadrt::lmdp::excitation_for(&refs, &params),
            params,
            reference: refs,
        };
        let u_rl = rng.uniform_range((-20.0, 20.0));

        env.set_state(state.clone());
        let a = env.env_step(u_rl).unwrap();
        let plant_a = env.state().plant.to_vec();
        env.set_state(state);
        let b = env.env_step(u_rl).unwrap();
        let plant_b = env.state().plant.to_vec();

        let obs_same = a.0.iter().zip(b.0.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
        let plant_same = plant_a
            .iter()
            .zip(plant_b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        if !(obs_same
            && plant_same
            && a.1.to_bits() == b.1.to_bits()
            && a.3.to_bits() == b.3.to_bits()
            && a.4.to_bits() == b.4.to_bits())
        {
            all_bitwise = false;
            break;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "5 Markov determinism",
        all_bitwise && secs < 60.0,
        &format!("10000 fuzzed transitions bitwise repeatable: {all_bitwise}, {secs:.1} s"),
    );
}

// ---------------------------------------------------------------- criterion 6

/// 1-D double integrator with quadratic cost: the sanity check plant for
/// the learner, with a closed-form optimal baseline.
struct DoubleIntegrator {
    x: [f64; 2],
    k: usize,
    a: Matrix,
    b: Matrix,
    q: Matrix,
    r: f64,
}

const TOY_DT: f64 = 0.1;
const TOY_HORIZON: usize = 50;
const TOY_UMAX: f64 = 2.0;
const TOY_GAMMA: f64 = 0.9;
// State walls keep early random policies from driving the quadratic cost
// (and hence the Q targets) to destabilizing magnitudes; optimal
// trajectories from the start set never touch them.
const TOY_WALL: f64 = 3.0;

impl DoubleIntegrator {
    fn new() -> Self {
        let a = Matrix::from_vec(2, 2, vec![1.0, TOY_DT, 0.0, 1.0]);
        let b = Matrix::from_vec(2, 1, vec![0.5 * TOY_DT * TOY_DT, TOY_DT]);
        let q = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.1]);
        DoubleIntegrator {
            x: [0.0; 2],
            k: 0,
            a,
            b,
            q,
            r: 1.0,
        }
    }

    fn cost(&self, u: f64) -> f64 {
        let x = &self.x;
        x[0] * x[0] * self.q[(0, 0)] + x[1] * x[1] * self.q[(1, 1)] + self.r * u * u
    }

    fn advance(&mut self, u: f64) {
        let x0 = self.a[(0, 0)] * self.x[0] + self.a[(0, 1)] * self.x[1] + self.b[(0, 0)] * u;
        let x1 = self.a[(1, 0)] * self.x[0] + self.a[(1, 1)] * self.x[1] + self.b[(1, 0)] * u;
        self.x = [x0.clamp(-TOY_WALL, TOY_WALL), x1.clamp(-TOY_WALL, TOY_WALL)];
        self.k += 1;
    }
}

impl Environment for DoubleIntegrator {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        TOY_HORIZON
    }

    fn reset(&mut self, rng: &mut SeededRng) -> Vec<f64> {
        self.x = [rng.uniform_range((-1.0, 1.0)), rng.uniform_range((-0.5, 0.5))];
        self.k = 0;
        self.x.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> mbcadrt::Result<(Vec<f64>, f64, bool)> {
        let u = action[0].clamp(-TOY_UMAX, TOY_UMAX);
        let cost = self.cost(u);
        self.advance(u);
        // Reward scaled so Q-values stay O(1) for the small networks.
        Ok((self.x.to_vec(), -cost / 10.0, self.k >= TOY_HORIZON))
    }
}

/// Discounted quadratic cost of a policy from a fixed set of initial
/// states; this is (up to sign and scale) the objective the agent trains on.
fn toy_policy_cost(policy: &mut dyn FnMut(&[f64]) -> f64, starts: &[[f64; 2]]) -> f64 {
    let mut total = 0.0;
    for s0 in starts {
        let mut env = DoubleIntegrator::new();
        env.x = *s0;
        let mut disc = 1.0;
        for _ in 0..TOY_HORIZON {
            let u = policy(&env.x).clamp(-TOY_UMAX, TOY_UMAX);
            total += disc * env.cost(u);
            disc *= TOY_GAMMA;
            env.advance(u);
        }
    }
    total
}

#[test]
fn criterion_6_learner_sanity() {
    let start = Instant::now();
    let env_proto = DoubleIntegrator::new();
    // The agent optimizes a discounted return, whose analytic optimum is
    // the discounted LQR: the plain Riccati solution on (sqrt(g)A, sqrt(g)B).
    let r_mat = Matrix::from_vec(1, 1, vec![env_proto.r]);
    let sg = TOY_GAMMA.sqrt();
    let scale = |m: &Matrix| {
        let mut out = m.clone();
        for v in out.data_mut() {
            *v *= sg;
        }
        out
    };
    let (a_d, b_d) = (scale(&env_proto.a), scale(&env_proto.b));
    let p = dare_solve(&a_d, &b_d, &env_proto.q, &r_mat).unwrap();
    let k_gain = lqr_gain(&a_d, &b_d, &r_mat, &p).unwrap();
    let (k0, k1) = (k_gain[(0, 0)], k_gain[(0, 1)]);

    let starts: Vec<[f64; 2]> = {
        let mut rng = SeededRng::new(60);
        (0..16)
            .map(|_| [rng.uniform_range((-1.0, 1.0)), rng.uniform_range((-0.5, 0.5))])
            .collect()
    };
    let lqr_cost = toy_policy_cost(&mut |x| -(k0 * x[0] + k1 * x[1]), &starts);

    let hyper = DdpgHyper {
        gamma: TOY_GAMMA,
        eta: 1e-3,
        batch: 64,
        actor_lr: 1e-4,
        critic_lr: 3e-4,
        seq_len: 8,
        burn_in: 2,
        update_interval: 1,
        warmup: 500,
        ou_rate: 0.15,
        ou_vol_start: 0.3,
        ou_vol_end: 0.05,
    };
    let mut within = 0;
    let mut ratios = Vec::new();
    for seed in [1_u64, 2, 3] {
        let mut rng = SeededRng::new(seed);
        let nets = AgentNets::new(2, 1, 32, RecurrentKind::None, TOY_UMAX, &mut rng).unwrap();
        let mut learner = DdpgLearner::new(nets, hyper).unwrap();
        let mut buffer = ReplayBuffer::new(20_000);
        let mut env = DoubleIntegrator::new();
        train_agent(&mut env, &mut learner, &mut buffer, 200, &mut rng).unwrap();
        let actor = learner.nets.actor.clone();
        let cost = toy_policy_cost(
            &mut |x| {
                let input = Matrix::from_vec(1, 2, x.to_vec());
                let hidden = actor.zero_hidden(1);
                let (outs, _, _) = actor.forward(&[input], &hidden).unwrap();
                outs[0][(0, 0)]
            },
            &starts,
        );
        let ratio = cost / lqr_cost;
        ratios.push(ratio);
        if ratio <= 1.2 {
            within += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "6 learner sanity",
        within >= 2 && secs < 900.0,
        &format!(
            "cost ratios vs optimum [{}], {within}/3 within 20%, {secs:.0} s",
            ratios
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

// ----------------------------------------------------- criteria 7-10 support

fn checkpoint_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../checkpoints")
}

static TRAIN_LOCK: Mutex<()> = Mutex::new(());

/// Loads the cached actor for (variant, scenario, seed); trains and caches
/// it when absent. Training is deterministic, so the cache is equivalent to
/// training in place.
fn trained_actor(variant: Variant, scenario: Scenario, seed: u64) -> Network {
    let store = CheckpointStore::new(checkpoint_dir());
    if let Ok(net) = store.load_actor(variant, scenario, seed) {
        return net;
    }
    let _guard = TRAIN_LOCK.lock().unwrap();
    if let Ok(net) = store.load_actor(variant, scenario, seed) {
        return net;
    }
    let mut config = RunConfig::default();
    config.domain.scenario = scenario;
    let mut setup = config.train_setup(seed);
    setup.only_dr = variant == Variant::OnlyDr;
    setup.mlp = variant == Variant::Mlp;
    let ctrl = nominal_controller(&config);
    let (nets, _) = train(&setup, &ctrl).unwrap();
    std::fs::create_dir_all(store.dir.clone()).unwrap();
    nets.actor
        .to_doc("actor")
        .save(&store.actor_path(variant, scenario, seed))
        .unwrap();
    store.load_actor(variant, scenario, seed).unwrap()
}

fn evaluate_variant(
    scenario_name: &str,
    variant: Variant,
    seeds: &[u64],
    config: &RunConfig,
) -> Vec<RunResult> {
    let scenario = scenario_by_name(scenario_name).unwrap();
    let ctrl = nominal_controller(config);
    if !variant.needs_checkpoint() {
        return vec![rollout(&scenario, variant, config, &ctrl, None, None).unwrap()];
    }
    seeds
        .iter()
        .map(|&seed| {
            let actor = trained_actor(variant, scenario.scenario, seed);
            rollout(&scenario, variant, config, &ctrl, Some(&actor), Some(seed)).unwrap()
        })
        .collect()
}

fn median_norm(results: &[RunResult]) -> f64 {
    let mut norms: Vec<f64> = results.iter().map(|r| r.error_2norm).collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    norms[norms.len() / 2]
}

fn stable(results: &[RunResult], bound: f64) -> bool {
    results
        .iter()
        .all(|r| r.trajectory.iter().all(|rec| rec.y.abs() < bound))
}

const SEEDS: [u64; 3] = [1, 2, 3];

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_scenario1_ordering() {
    let config = RunConfig::default();
    let proposed = evaluate_variant("s1-light", Variant::Proposed, &SEEDS, &config);
    let only_dr = evaluate_variant("s1-light", Variant::OnlyDr, &SEEDS, &config);
    let only_mbc = evaluate_variant("s1-light", Variant::OnlyMbc, &SEEDS, &config);
    let p = median_norm(&proposed);
    let d = median_norm(&only_dr);
    let m = median_norm(&only_mbc);

    let nominal_proposed = median_norm(&evaluate_variant(
        "nominal",
        Variant::Proposed,
        &SEEDS,
        &config,
    ));
    let nominal_mbc = median_norm(&evaluate_variant("nominal", Variant::OnlyMbc, &SEEDS, &config));

    report(
        "7 scenario-1 ordering",
        p < m && p < d,
        &format!(
            "perturbed medians: proposed {p:.4} vs only-mbc {m:.4} vs only-dr {d:.4}; \
             nominal: proposed {nominal_proposed:.4}, only-mbc {nominal_mbc:.4} \
             (only-mbc may win nominal)"
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_scenario2_backlash_ordering() {
    let config = RunConfig::default();
    let proposed = evaluate_variant("s2-wide-gap", Variant::Proposed, &SEEDS, &config);
    let only_mbc = evaluate_variant("s2-wide-gap", Variant::OnlyMbc, &SEEDS, &config);
    let p = median_norm(&proposed);
    let m = median_norm(&only_mbc);
    report(
        "8 scenario-2 backlash ordering",
        p < m,
        &format!("widest backlash: proposed median {p:.4} < only-mbc {m:.4}"),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_recurrent_vs_feedforward() {
    let config = RunConfig::default();
    let lstm = evaluate_variant("s1-light", Variant::Proposed, &SEEDS, &config);
    let mlp = evaluate_variant("s1-light", Variant::Mlp, &SEEDS, &config);
    let l = median_norm(&lstm);
    let m = median_norm(&mlp);
    report(
        "9 recurrent vs feedforward",
        l <= m,
        &format!("median error norm: recurrent {l:.4} <= feedforward {m:.4}"),
    );
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_all_variants_stable() {
    let config = RunConfig::default();
    let mut ok = true;
    let mut worst = 0.0_f64;
    for (scenario, variants) in [
        (
            "s1-light",
            vec![Variant::Proposed, Variant::OnlyDr, Variant::OnlyMbc, Variant::Mlp],
        ),
        ("s2-wide-gap", vec![Variant::Proposed, Variant::OnlyMbc]),
        ("nominal", vec![Variant::Proposed, Variant::OnlyMbc]),
    ] {
        let spec = scenario_by_name(scenario).unwrap();
        let refs = spec.reference();
        let bound = 10.0 * refs.seg1.abs().max(refs.seg2.abs());
        for variant in variants {
            let results = evaluate_variant(scenario, variant, &SEEDS, &config);
            for r in &results {
                let peak = r
                    .trajectory
                    .iter()
                    .map(|rec| rec.y.abs())
                    .fold(0.0, f64::max);
                worst = worst.max(peak / bound);
            }
            ok &= stable(&results, bound);
        }
    }
    report(
        "10 all variants stable",
        ok,
        &format!("worst |y| over its 10x-reference bound: {worst:.3}"),
    );
}

// --------------------------------------------------------------- criterion 11

#[test]
fn criterion_11_end_to_end_determinism() {
    // Short but complete training runs (past warmup, so gradient updates,
    // target updates, and exploration noise are all exercised).
    let mut config = RunConfig::default();
    config.ddpg.episodes = 4;
    config.ddpg.hyper.warmup = 600;
    config.ddpg.hidden = 16;
    let ctrl = nominal_controller(&config);
    let checkpoints: Vec<String> = (0..2)
        .map(|_| {
            let setup = config.train_setup(77);
            let (nets, logs) = train(&setup, &ctrl).unwrap();
            format!(
                "{}\n{}",
                nets.actor.to_doc("actor").to_text(),
                mbcadrt::lmdp::log_to_csv(&logs)
            )
        })
        .collect();
    let train_same = checkpoints[0] == checkpoints[1];

    // Repeated comparison runs must serialize identically, byte for byte.
    let scenario = scenario_by_name("s1-heavy").unwrap();
    let store = CheckpointStore::new(checkpoint_dir());
    let variants = [Variant::OnlyMbc, Variant::OpenLoop];
    let outputs: Vec<String> = (0..2)
        .map(|_| {
            let results =
                run_comparison(&scenario, &variants, &[1], &config, &ctrl, &store).unwrap();
            let trajs: String = results.iter().map(trajectory_csv).collect();
            format!("{}{}", metrics_csv(&results), trajs)
        })
        .collect();
    let compare_same = outputs[0] == outputs[1];

    report(
        "11 end-to-end determinism",
        train_same && compare_same,
        &format!("repeated training identical: {train_same}, repeated comparison identical: {compare_same}"),
    );
}

// Shared sanity for the metric helper used throughout the gate.
#[test]
fn error_norm_helper_matches_hand_value() {
    use mbcadrt::eval::TrajectoryRecord;
    let rec = |e: f64| TrajectoryRecord {
        t: 0.0,
        y_r: 0.0,
        y: -e,
        e,
        u_total: 0.0,
        u_mbc: 0.0,
        u_rl: 0.0,
        reward: 0.0,
    };
    assert_eq!(error_2norm(&[rec(3.0), rec(4.0)], 1.0), 5.0);
}
