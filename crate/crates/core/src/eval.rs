//! Scenario evaluation: a catalog of fixed test dynamics, deterministic
//! rollouts of each controller variant, tracking metrics, and CSV export.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lmdp::{HybridEnv, Scenario};
use crate::mbc::ControllerSS;
use crate::nn::Network;
use crate::numerics::{Matrix, SeededRng};
use crate::plant::{PlantParams, ReferenceProfile, SEGMENT_SWITCH_TIME};

/// One fixed evaluation setting: plant parameters and reference levels.
/// `reference_divisor` handles catalog entries whose published reference
/// levels are printed in millimetres; the effective profile divides by it.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub name: &'static str,
    pub scenario: Scenario,
    pub params: PlantParams,
    pub reference_raw: ReferenceProfile,
    pub reference_divisor: f64,
}

impl ScenarioSpec {
    pub fn reference(&self) -> ReferenceProfile {
        ReferenceProfile {
            seg1: self.reference_raw.seg1 / self.reference_divisor,
            seg2: self.reference_raw.seg2 / self.reference_divisor,
            ..self.reference_raw
        }
    }
}

/// The eight published test settings: the backlash-free nominal case, three
/// corner cases and one interior draw with fixed nominal backlash, and three
/// cases with perturbed backlash width.
pub fn scenario_catalog() -> Vec<ScenarioSpec> {
    let nominal = PlantParams::default();
    let refs = ReferenceProfile::default();
    let corner = |m_b, m_e, delta| PlantParams {
        m_b,
        m_e,
        delta,
        ..nominal
    };
    // Randomization ranges: body mass, engine-side mass, backlash width,
    // and the two reference levels.
    let (mb_min, mb_max) = (0.1160, 0.3480);
    let (me_min, me_max) = (0.5200, 1.5600);
    let (d_min, d_max) = (0.0025, 0.0075);
    let seg1_min = -0.01515;
    let seg2_max = 0.030303;
    let extremes = ReferenceProfile {
        seg1: seg1_min,
        seg2: seg2_max,
        ..refs
    };
    vec![
        ScenarioSpec {
            name: "nominal",
            scenario: Scenario::S1,
            // Backlash absent entirely in the nominal check.
            params: corner(nominal.m_b, nominal.m_e, 0.0),
            reference_raw: refs,
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s1-light",
            scenario: Scenario::S1,
            params: corner(mb_min, me_min, nominal.delta),
            reference_raw: extremes,
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s1-heavy",
            scenario: Scenario::S1,
            params: corner(mb_max, me_max, nominal.delta),
            reference_raw: extremes,
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s1-mixed",
            scenario: Scenario::S1,
            params: corner(mb_max, me_min, nominal.delta),
            reference_raw: extremes,
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s1-interior",
            scenario: Scenario::S1,
            params: corner(0.2998, 1.5179, nominal.delta),
            reference_raw: ReferenceProfile {
                seg1: -0.00940022,
                seg2: 0.0290263,
                ..refs
            },
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s2-wide-gap",
            scenario: Scenario::S2,
            params: corner(mb_min, me_min, d_max),
            reference_raw: refs,
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s2-narrow-gap",
            scenario: Scenario::S2,
            params: corner(mb_max, me_max, d_min),
            reference_raw: extremes,
            reference_divisor: 1.0,
        },
        ScenarioSpec {
            name: "s2-interior",
            scenario: Scenario::S2,
            params: corner(0.26798, 0.68912, 0.00309498),
            // Published levels are in millimetres; the divisor converts.
            reference_raw: ReferenceProfile {
                seg1: -7.5158,
                seg2: 16.7970,
                ..refs
            },
            reference_divisor: 1000.0,
        },
    ]
}

pub fn scenario_by_name(name: &str) -> Result<ScenarioSpec> {
    scenario_catalog()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = scenario_catalog().iter().map(|s| s.name).collect();
            Error::Config(format!(
                "unknown scenario {name:?}; known: {}",
                names.join(", ")
            ))
        })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Variant {
    /// Hybrid controller: model-based term plus trained recurrent agent.
    Proposed,
    /// Trained recurrent agent alone.
    OnlyDr,
    /// Model-based controller alone.
    OnlyMbc,
    /// No control input at all.
    OpenLoop,
    /// Hybrid controller with a feedforward (non-recurrent) agent.
    Mlp,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Proposed,
        Variant::OnlyDr,
        Variant::OnlyMbc,
        Variant::OpenLoop,
        Variant::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::OnlyDr => "only-dr",
            Variant::OnlyMbc => "only-mbc",
            Variant::OpenLoop => "open-loop",
            Variant::Mlp => "mlp",
        }
    }

    /// Variants that load a trained actor checkpoint.
    pub fn needs_checkpoint(&self) -> bool {
        matches!(self, Variant::Proposed | Variant::OnlyDr | Variant::Mlp)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub y_r: f64,
    pub y: f64,
    pub e: f64,
    pub u_total: f64,
    pub u_mbc: f64,
    pub u_rl: f64,
    pub reward: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub scenario: &'static str,
    pub variant: Variant,
    /// Seed of the checkpoint used; None for variants without one.
    pub seed: Option<u64>,
    pub trajectory: Vec<TrajectoryRecord>,
    pub error_2norm: f64,
    pub peak_overshoot: f64,
    pub settling_time: Option<f64>,
    pub episodic_return: f64,
}

/// √(Σ e²) over the per-step tracking errors, times the reporting scale.
pub fn error_2norm(trajectory: &[TrajectoryRecord], norm_scale: f64) -> f64 {
    trajectory
        .iter()
        .map(|r| r.e * r.e)
        .sum::<f64>()
        .sqrt()
        * norm_scale
}

/// Largest signed excursion of y past the reference, in the direction of the
/// second reference step, over t >= the segment switch. Zero if no excursion.
pub fn peak_overshoot(trajectory: &[TrajectoryRecord], reference: &ReferenceProfile) -> f64 {
    let sign = (reference.seg2 - reference.seg1).signum();
    trajectory
        .iter()
        .filter(|r| r.t >= SEGMENT_SWITCH_TIME)
        .map(|r| sign * (r.y - r.y_r))
        .fold(0.0, f64::max)
}

/// Earliest time in [t_start, t_end) after which |e| stays within `band`
/// for every remaining sample of the window. None if it never settles.
pub fn settling_time(
    trajectory: &[TrajectoryRecord],
    t_start: f64,
    t_end: f64,
    band: f64,
) -> Option<f64> {
    let window: Vec<&TrajectoryRecord> = trajectory
        .iter()
        .filter(|r| r.t >= t_start && r.t < t_end)
        .collect();
    let mut settled_at = None;
    for r in window {
        if r.e.abs() <= band {
            settled_at.get_or_insert(r.t);
        } else {
            settled_at = None;
        }
    }
    settled_at
}

fn summarize(
    scenario: &ScenarioSpec,
    variant: Variant,
    seed: Option<u64>,
    trajectory: Vec<TrajectoryRecord>,
    norm_scale: f64,
    horizon_end: f64,
) -> RunResult {
    let reference = scenario.reference();
    let band = 0.01 * (reference.seg2 - reference.seg1).abs();
    RunResult {
        scenario: scenario.name,
        variant,
        seed,
        error_2norm: error_2norm(&trajectory, norm_scale),
        peak_overshoot: peak_overshoot(&trajectory, &reference),
        settling_time: settling_time(&trajectory, SEGMENT_SWITCH_TIME, horizon_end, band),
        episodic_return: trajectory.iter().map(|r| r.reward).sum(),
        trajectory,
    }
}

/// Deterministic closed-loop rollout of one variant on one fixed scenario.
/// `actor` must be Some for the learning-based variants.
pub fn rollout(
    scenario: &ScenarioSpec,
    variant: Variant,
    config: &RunConfig,
    controller: &ControllerSS,
    actor: Option<&Network>,
    seed: Option<u64>,
) -> Result<RunResult> {
    if variant.needs_checkpoint() && actor.is_none() {
        return Err(Error::MissingCheckpoint(format!(
            "variant {variant} needs a trained actor"
        )));
    }
    let only_dr = matches!(variant, Variant::OnlyDr | Variant::OpenLoop);
    let mut env = HybridEnv::new(
        config.env,
        config.domain,
        config.reward,
        config.scales,
        controller.clone(),
        only_dr,
    );
    env.set_fixed_domain(scenario.params, scenario.reference());
    // The fixed domain makes reset deterministic; the rng draw is unused.
    let mut rng = SeededRng::new(0);
    let mut obs = crate::ddpg::Environment::reset(&mut env, &mut rng);

    let mut hidden = actor.map(|a| a.zero_hidden(1));
    let mut trajectory = Vec::with_capacity(config.env.horizon);
    for k in 0..config.env.horizon {
        let t = k as f64 * config.env.dt;
        let y_r = obs[0] * config.scales.position;
        let y = obs[1] * config.scales.position;
        let e = obs[2] * config.scales.position;
        let u_rl_cmd = match (actor, hidden.as_mut()) {
            (Some(net), Some(h)) => {
                let x = Matrix::from_vec(1, obs.len(), obs.clone());
                let (outs, next, _) = net.forward(&[x], h)?;
                *h = next;
                outs[0][(0, 0)]
            }
            _ => 0.0,
        };
        let (next_obs, reward, _done, u_total, u_mbc) = env.env_step(u_rl_cmd)?;
        trajectory.push(TrajectoryRecord {
            t,
            y_r,
            y,
            e,
            u_total,
            u_mbc,
            // Effective agent share after the actuator clamp, so the two
            // components always sum to the applied input.
            u_rl: u_total - u_mbc,
            reward,
        });
        obs = next_obs;
    }
    let horizon_end = config.env.horizon as f64 * config.env.dt;
    Ok(summarize(
        scenario,
        variant,
        seed,
        trajectory,
        config.eval.norm_scale,
        horizon_end,
    ))
}

/// Locates trained actor checkpoints by variant, randomization scenario,
/// and seed under a single directory.
#[derive(Clone, Debug)]
pub struct CheckpointStore {
    pub dir: PathBuf,
}

impl CheckpointStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CheckpointStore { dir: dir.into() }
    }

    pub fn actor_path(&self, variant: Variant, scenario: Scenario, seed: u64) -> PathBuf {
        let s = match scenario {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
        };
        self.dir.join(format!("actor-{}-{s}-seed{seed}.txt", variant.name()))
    }

    pub fn load_actor(&self, variant: Variant, scenario: Scenario, seed: u64) -> Result<Network> {
        let path = self.actor_path(variant, scenario, seed);
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path.display().to_string()));
        }
        let doc = crate::textdoc::TextDoc::load(&path)?;
        Network::from_doc(&doc)
    }
}

/// Evaluates every requested variant on one scenario: learning-based
/// variants once per seed (loading their checkpoints), the rest once.
pub fn run_comparison(
    scenario: &ScenarioSpec,
    variants: &[Variant],
    seeds: &[u64],
    config: &RunConfig,
    controller: &ControllerSS,
    store: &CheckpointStore,
) -> Result<Vec<RunResult>> {
    if variants.is_empty() {
        return Err(Error::Precondition("no variants requested".into()));
    }
    let mut out = Vec::new();
    for &variant in variants {
        if variant.needs_checkpoint() {
            for &seed in seeds {
                let actor = store.load_actor(variant, scenario.scenario, seed)?;
                out.push(rollout(
                    scenario,
                    variant,
                    config,
                    controller,
                    Some(&actor),
                    Some(seed),
                )?);
            }
        } else {
            out.push(rollout(scenario, variant, config, controller, None, None)?);
        }
    }
    Ok(out)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn trajectory_csv(result: &RunResult) -> String {
    let mut out = String::from("t,y_r,y,e,u_total,u_mbc,u_rl,reward\n");
    for r in &result.trajectory {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.t),
            fmt_f64(r.y_r),
            fmt_f64(r.y),
            fmt_f64(r.e),
            fmt_f64(r.u_total),
            fmt_f64(r.u_mbc),
            fmt_f64(r.u_rl),
            fmt_f64(r.reward),
        ));
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
    if header != "t,y_r,y,e,u_total,u_mbc,u_rl,reward" {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    lines
        .map(|line| {
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad field {f:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != 8 {
                return Err(Error::Parse(format!("expected 8 fields, got {}", vals.len())));
            }
            Ok(TrajectoryRecord {
                t: vals[0],
                y_r: vals[1],
                y: vals[2],
                e: vals[3],
                u_total: vals[4],
                u_mbc: vals[5],
                u_rl: vals[6],
                reward: vals[7],
            })
        })
        .collect()
}

pub fn metrics_csv(results: &[RunResult]) -> String {
    let mut out = String::from(
        "scenario,variant,seed,error_2norm,peak_overshoot,settling_time,episodic_return\n",
    );
    for r in results {
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        let settle = r
            .settling_time
            .map(fmt_f64)
            .unwrap_or_else(|| "unsettled".into());
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario,
            r.variant,
            seed,
            fmt_f64(r.error_2norm),
            fmt_f64(r.peak_overshoot),
            settle,
            fmt_f64(r.episodic_return),
        ));
    }
    out
}

fn trajectory_file_name(r: &RunResult) -> String {
    match r.seed {
        Some(seed) => format!("traj-{}-{}-seed{}.csv", r.scenario, r.variant, seed),
        None => format!("traj-{}-{}.csv", r.scenario, r.variant),
    }
}

/// Writes `metrics.csv` plus one trajectory file per result into `dir`.
pub fn export(results: &[RunResult], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(results))?;
    for r in results {
        std::fs::write(dir.join(trajectory_file_name(r)), trajectory_csv(r))?;
    }
    Ok(())
}
