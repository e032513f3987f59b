//! Synthetic rollouts: a torque-limited pendulum under scripted controllers,
//! and a catalog of response functions of the pendulum state that stand in
//! for neurons with known structure.
//!
//! Angle convention: `theta = 0` is upright, angles are wrapped to `(-pi, pi]`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Episode, Matrix, NeuronId, TrajectoryDataset};
use crate::error::{Error, Result};

pub const STATE_NAMES: [&str; 2] = ["theta", "theta_dot"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub torque_limit: f64,
    pub speed_limit: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            torque_limit: 2.0,
            speed_limit: 8.0,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("m", self.m),
            ("l", self.l),
            ("dt", self.dt),
            ("torque_limit", self.torque_limit),
            ("speed_limit", self.speed_limit),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(Error::Config(format!(
                "pendulum {name} must be positive, got {v}"
            ))),
            None => Ok(()),
        }
    }

    fn inertia(&self) -> f64 {
        self.m * self.l * self.l / 3.0
    }

    /// Kinetic plus potential energy, zero when resting upright.
    pub fn energy(&self, s: State) -> f64 {
        0.5 * self.inertia() * s.theta_dot * s.theta_dot
            + 0.5 * self.m * self.g * self.l * (s.theta.cos() - 1.0)
    }

    /// One semi-implicit Euler step under torque `u`, which is clipped first.
    pub fn step(&self, s: State, u: f64) -> State {
        let u = u.clamp(-self.torque_limit, self.torque_limit);
        let accel =
            3.0 * self.g / (2.0 * self.l) * s.theta.sin() + 3.0 / (self.m * self.l * self.l) * u;
        let theta_dot = (s.theta_dot + accel * self.dt).clamp(-self.speed_limit, self.speed_limit);
        State {
            theta: wrap_angle(s.theta + theta_dot * self.dt),
            theta_dot,
        }
    }
}

/// Maps any angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let wrapped = x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub theta: f64,
    pub theta_dot: f64,
}

impl State {
    pub const fn new(theta: f64, theta_dot: f64) -> Self {
        State { theta, theta_dot }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Energy pumping far from upright, PD stabilization near it.
    EnergyPd,
    /// Uniform random torque within the limit.
    Random,
    Zero,
}

impl FromStr for Controller {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy_pd" | "energy-pd" => Ok(Controller::EnergyPd),
            "random" => Ok(Controller::Random),
            "zero" => Ok(Controller::Zero),
            other => Err(Error::Config(format!(
                "unknown controller `{other}` (expected energy_pd, random or zero)"
            ))),
        }
    }
}

/// Gains of the `EnergyPd` controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingUpGains {
    pub pump: f64,
    pub kp: f64,
    pub kd: f64,
    /// PD takes over when `|theta|` is below this angle.
    pub capture_angle: f64,
}

impl Default for SwingUpGains {
    fn default() -> Self {
        SwingUpGains {
            pump: 1.0,
            kp: 10.0,
            kd: 2.0,
            capture_angle: 0.5,
        }
    }
}

impl SwingUpGains {
    pub fn torque(&self, params: &PendulumParams, s: State) -> f64 {
        let u = if s.theta.abs() < self.capture_angle {
            -self.kp * s.theta - self.kd * s.theta_dot
        } else if s.theta_dot == 0.0 {
            params.torque_limit
        } else {
            -self.pump * params.energy(s) * s.theta_dot
        };
        u.clamp(-params.torque_limit, params.torque_limit)
    }
}

/// Rolls out `horizon` steps from `initial`. Row `t` holds the state before the
/// `t`-th action and the action itself.
pub fn simulate_episode(
    params: &PendulumParams,
    controller: Controller,
    initial: State,
    horizon: usize,
    rng: &mut impl Rng,
) -> (Vec<State>, Vec<f64>) {
    let gains = SwingUpGains::default();
    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut s = initial;
    for _ in 0..horizon {
        let u = match controller {
            Controller::EnergyPd => gains.torque(params, s),
            Controller::Random => rng.random_range(-params.torque_limit..=params.torque_limit),
            Controller::Zero => 0.0,
        };
        states.push(s);
        actions.push(u);
        s = params.step(s, u);
    }
    (states, actions)
}

fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

fn to_episode(states: &[State], actions: &[f64]) -> Episode {
    let flat: Vec<f64> = states.iter().flat_map(|s| [s.theta, s.theta_dot]).collect();
    Episode {
        states: Matrix::from_vec(states.len(), 2, flat).expect("two columns per state"),
        responses: Matrix::zeros(states.len(), 0),
        actions: Some(Matrix::column_vector(actions)),
    }
}

/// Episodes starting from `theta ~ U(-pi, pi]`, `theta_dot ~ U(-1, 1)`, each
/// driven by its own random stream derived from `seed`. The dataset has no
/// neurons yet; see [`attach_neurons`].
pub fn generate_pendulum(
    params: &PendulumParams,
    controller: Controller,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    params.validate()?;
    if episodes == 0 || horizon == 0 {
        return Err(Error::Config(
            "episodes and horizon must be at least 1".into(),
        ));
    }
    let eps = (0..episodes)
        .map(|k| {
            let mut rng = episode_rng(seed, k);
            let theta = wrap_angle(PI - rng.random_range(0.0..2.0 * PI));
            let theta_dot = rng.random_range(-1.0..1.0);
            let (states, actions) = simulate_episode(
                params,
                controller,
                State::new(theta, theta_dot),
                horizon,
                &mut rng,
            );
            to_episode(&states, &actions)
        })
        .collect();
    TrajectoryDataset::new(
        STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        Vec::new(),
        eps,
    )
}

/// Single episode from a fixed initial state.
pub fn generate_from(
    params: &PendulumParams,
    controller: Controller,
    initial: State,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut rng = episode_rng(seed, 0);
    let (states, actions) = simulate_episode(params, controller, initial, horizon, &mut rng);
    TrajectoryDataset::new(
        STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        Vec::new(),
        vec![to_episode(&states, &actions)],
    )
}

/// A response function of `(theta, theta_dot)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Response {
    /// 1 when state dimension `dim` exceeds `threshold`, else 0.
    SignSplit {
        dim: usize,
        threshold: f64,
    },
    /// `2 * [theta > 0] + [theta_dot > 0]`.
    Quadrant,
    /// `w0 * theta + w1 * theta_dot + bias`.
    Affine {
        weights: [f64; 2],
        bias: f64,
    },
    Constant {
        value: f64,
    },
    /// `base` plus Gaussian noise of standard deviation `sigma`.
    Noisy {
        base: Box<Response>,
        sigma: f64,
    },
}

impl Response {
    /// Noise-free value.
    pub fn eval(&self, theta: f64, theta_dot: f64) -> f64 {
        let s = [theta, theta_dot];
        match self {
            Response::SignSplit { dim, threshold } => f64::from(u8::from(s[*dim] > *threshold)),
            Response::Quadrant => f64::from(2 * u8::from(theta > 0.0) + u8::from(theta_dot > 0.0)),
            Response::Affine { weights, bias } => {
                weights[0] * theta + weights[1] * theta_dot + bias
            }
            Response::Constant { value } => *value,
            Response::Noisy { base, .. } => base.eval(theta, theta_dot),
        }
    }

    fn sigma(&self) -> f64 {
        match self {
            Response::Noisy { base, sigma } => sigma + base.sigma(),
            _ => 0.0,
        }
    }
}

/// A named synthetic neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub name: String,
    pub response: Response,
}

fn parse_dim(token: &str) -> Result<usize> {
    match token {
        "theta" | "0" => Ok(0),
        "theta_dot" | "1" => Ok(1),
        other => Err(Error::Config(format!("unknown state dimension `{other}`"))),
    }
}

fn parse_number(token: &str, spec: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("bad number `{token}` in neuron spec `{spec}`")))
}

fn parse_response(spec: &str) -> Result<Response> {
    let parts: Vec<&str> = spec.split(':').collect();
    let affine = |w0: f64, w1: f64| Response::Affine {
        weights: [w0, w1],
        bias: 0.0,
    };
    let bad = || {
        Error::Config(format!(
            "unknown neuron spec `{spec}` (expected theta, theta_dot, quadrant, sum, diff, \
             sign:<dim>:<c>, affine:<w0>:<w1>:<b>, const:<v> or noisy:<sigma>:<spec>)"
        ))
    };
    match parts.as_slice() {
        ["theta"] => Ok(affine(1.0, 0.0)),
        ["theta_dot"] => Ok(affine(0.0, 1.0)),
        ["sum"] => Ok(affine(1.0, 1.0)),
        ["diff"] => Ok(affine(1.0, -1.0)),
        ["quadrant"] => Ok(Response::Quadrant),
        ["sign", dim, c] => Ok(Response::SignSplit {
            dim: parse_dim(dim)?,
            threshold: parse_number(c, spec)?,
        }),
        ["affine", w0, w1, b] => Ok(Response::Affine {
            weights: [parse_number(w0, spec)?, parse_number(w1, spec)?],
            bias: parse_number(b, spec)?,
        }),
        ["const", v] => Ok(Response::Constant {
            value: parse_number(v, spec)?,
        }),
        ["noisy", sigma, ..] if parts.len() > 2 => {
            let sigma = parse_number(sigma, spec)?;
            if sigma < 0.0 {
                return Err(Error::Config(format!("negative noise level in `{spec}`")));
            }
            Ok(Response::Noisy {
                base: Box::new(parse_response(&parts[2..].join(":"))?),
                sigma,
            })
        }
        _ => Err(bad()),
    }
}

impl FromStr for NeuronSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(NeuronSpec {
            name: s.to_string(),
            response: parse_response(s)?,
        })
    }
}

impl fmt::Display for NeuronSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Replaces the responses of `ds` with one column per spec, evaluated on the
/// first two state dimensions. Noise for spec `i` comes from its own stream
/// derived from `seed`, drawn in row order.
pub fn attach_neurons(
    ds: &TrajectoryDataset,
    specs: &[NeuronSpec],
    seed: u64,
) -> Result<TrajectoryDataset> {
    if ds.state_dim() < 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: ds.state_dim(),
        });
    }
    let mut noise: Vec<Option<(ChaCha8Rng, Normal<f64>)>> = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let sigma = spec.response.sigma();
            (sigma > 0.0).then(|| {
                let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
                (episode_rng(seed, i), normal)
            })
        })
        .collect();
    let responses = ds
        .episodes()
        .iter()
        .map(|ep| {
            let mut m = Matrix::zeros(ep.len(), specs.len());
            for (t, s) in ep.states.rows().enumerate() {
                for (i, spec) in specs.iter().enumerate() {
                    let mut v = spec.response.eval(s[0], s[1]);
                    if let Some((rng, normal)) = noise[i].as_mut() {
                        v += normal.sample(rng);
                    }
                    m.set(t, i, v);
                }
            }
            m
        })
        .collect();
    let ids = specs
        .iter()
        .map(|s| NeuronId::Name(s.name.clone()))
        .collect();
    ds.with_responses(ids, responses)
}
