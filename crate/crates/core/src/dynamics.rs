//! The dog-barometer environment.
//!
//! Hidden pressure `P` drives both the barometer reading `B` and next
//! period's weather `W`. Pressing the barometer button forces the next
//! reading to `High` whatever the pressure, which cuts the link between
//! `B` and `P` for that period. The joint transition factorizes as
//!
//! ```text
//! P(P', B', W' | P, pressed) = P(P' | P) * P(B' | P', pressed) * P(W' | P)
//! ```
//!
//! The agent sees `(B, W)`, or `(P, B, W)` when pressure is made visible.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of joint `(P, B, W)` states.
pub const NUM_WORLD_STATES: usize = 8;
pub const NUM_ACTIONS: usize = 4;

/// Random source used by every simulator and learner in the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

macro_rules! binary_variable {
    ($(#[$meta:meta])* $name:ident { $zero:ident, $one:ident }, $zero_ch:literal, $one_ch:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $zero = 0,
            $one = 1,
        }

        impl $name {
            pub const ALL: [$name; 2] = [$name::$zero, $name::$one];

            pub fn from_bit(bit: bool) -> Self {
                if bit { $name::$one } else { $name::$zero }
            }

            pub fn bit(self) -> usize {
                self as usize
            }

            pub fn symbol(self) -> char {
                match self {
                    $name::$zero => $zero_ch,
                    $name::$one => $one_ch,
                }
            }

            pub fn from_symbol(c: char) -> Option<Self> {
                match c.to_ascii_uppercase() {
                    $zero_ch => Some($name::$zero),
                    $one_ch => Some($name::$one),
                    _ => None,
                }
            }
        }
    };
}

binary_variable!(
    /// Barometric pressure, hidden from the agent unless made visible.
    Pressure { Low, High }, 'L', 'H'
);
binary_variable!(
    /// Barometer reading.
    Barometer { Low, High }, 'L', 'H'
);
binary_variable!(
    /// Current weather.
    Weather { Rain, Sun }, 'R', 'S'
);

/// The four things the dog can do. The declaration order `w < m < c < n`
/// is the canonical tie-break order used everywhere in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Wait = 0,
    Press = 1,
    ExitCoat = 2,
    ExitNoCoat = 3,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] =
        [Action::Wait, Action::Press, Action::ExitCoat, Action::ExitNoCoat];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Action::ExitCoat | Action::ExitNoCoat)
    }

    pub fn letter(self) -> char {
        match self {
            Action::Wait => 'w',
            Action::Press => 'm',
            Action::ExitCoat => 'c',
            Action::ExitNoCoat => 'n',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'w' => Some(Action::Wait),
            'm' => Some(Action::Press),
            'c' => Some(Action::ExitCoat),
            'n' => Some(Action::ExitNoCoat),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Every coefficient of the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    /// `P(P_t = Low | P_{t-1} = Low)`.
    pub rho_ll: f64,
    /// `P(P_t = High | P_{t-1} = High)`.
    pub rho_hh: f64,
    /// Barometer accuracy at low pressure, `P(B = Low | P = Low)`.
    pub alpha_l: f64,
    /// Barometer accuracy at high pressure, `P(B = High | P = High)`.
    pub alpha_h: f64,
    /// `P(W_t = Rain | P_{t-1} = Low)`.
    pub omega_rl: f64,
    /// `P(W_t = Sun | P_{t-1} = High)`.
    pub omega_sh: f64,
    /// No coat, sun.
    pub r_ns: f64,
    /// Coat, rain.
    pub r_cr: f64,
    /// Coat, sun.
    pub r_cs: f64,
    /// No coat, rain.
    pub r_nr: f64,
    /// Reward for each period spent in the house (wait or press).
    pub r_wait: f64,
    pub gamma: f64,
    /// Episode step cap. An episode that has not exited after `t_max`
    /// steps is truncated.
    pub t_max: u32,
    /// Probability that the auxiliary pre-episode pressure `P_{-1}` is high.
    pub p_initial_high: f64,
    pub pressure_visible: bool,
}

impl EnvParams {
    /// No pressure autocorrelation.
    pub fn exp1() -> Self {
        EnvParams {
            rho_ll: 0.5,
            rho_hh: 0.5,
            alpha_l: 0.9,
            alpha_h: 0.9,
            omega_rl: 0.9,
            omega_sh: 0.9,
            r_ns: 8.0,
            r_cr: 4.0,
            r_cs: -8.0,
            r_nr: -8.0,
            r_wait: -1.0,
            gamma: 0.95,
            t_max: 100,
            p_initial_high: 0.5,
            pressure_visible: false,
        }
    }

    /// Pressure persists with probability 0.75.
    pub fn exp2() -> Self {
        EnvParams { rho_ll: 0.75, rho_hh: 0.75, ..Self::exp1() }
    }

    pub fn with_visibility(mut self, pressure_visible: bool) -> Self {
        self.pressure_visible = pressure_visible;
        self
    }

    /// Number of distinct observations in this mode (4 hidden, 8 visible).
    pub fn num_observations(&self) -> usize {
        Observation::count(self.pressure_visible)
    }

    pub fn validate(&self) -> Result<()> {
        let probabilities = [
            ("rho_ll", self.rho_ll),
            ("rho_hh", self.rho_hh),
            ("alpha_l", self.alpha_l),
            ("alpha_h", self.alpha_h),
            ("omega_rl", self.omega_rl),
            ("omega_sh", self.omega_sh),
            ("p_initial_high", self.p_initial_high),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams { name, reason: format!("{p} is not a probability") });
            }
        }
        let rewards = [
            ("r_ns", self.r_ns),
            ("r_cr", self.r_cr),
            ("r_cs", self.r_cs),
            ("r_nr", self.r_nr),
            ("r_wait", self.r_wait),
        ];
        for (name, r) in rewards {
            if !r.is_finite() {
                return Err(Error::InvalidParams { name, reason: format!("{r} is not finite") });
            }
        }
        if !(self.r_ns >= self.r_cr && self.r_cr >= self.r_cs && self.r_cs >= self.r_nr) {
            return Err(Error::InvalidParams {
                name: "rewards",
                reason: "expected r_ns >= r_cr >= r_cs >= r_nr".into(),
            });
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParams { name: "gamma", reason: format!("{} is outside (0, 1]", self.gamma) });
        }
        if self.t_max == 0 {
            return Err(Error::InvalidParams { name: "t_max", reason: "must be at least 1".into() });
        }
        Ok(())
    }

    /// `P(P' = High | P)`.
    pub fn pressure_high_given(&self, p: Pressure) -> f64 {
        match p {
            Pressure::Low => 1.0 - self.rho_ll,
            Pressure::High => self.rho_hh,
        }
    }

    /// `P(B = High | P, pressed)`; a press in the previous period forces a high reading.
    pub fn barometer_high_given(&self, p: Pressure, pressed: bool) -> f64 {
        if pressed {
            return 1.0;
        }
        match p {
            Pressure::Low => 1.0 - self.alpha_l,
            Pressure::High => self.alpha_h,
        }
    }

    /// `P(W' = Sun | P)`, where `P` is the previous period's pressure.
    pub fn sun_given(&self, p: Pressure) -> f64 {
        match p {
            Pressure::Low => 1.0 - self.omega_rl,
            Pressure::High => self.omega_sh,
        }
    }

    pub fn walk_reward(&self, action: Action, walk: Weather) -> f64 {
        match (action, walk) {
            (Action::ExitCoat, Weather::Rain) => self.r_cr,
            (Action::ExitCoat, Weather::Sun) => self.r_cs,
            (Action::ExitNoCoat, Weather::Rain) => self.r_nr,
            (Action::ExitNoCoat, Weather::Sun) => self.r_ns,
            _ => self.r_wait,
        }
    }

    /// Expected one-step reward of `action` taken at pressure `p`. Exits
    /// average over the walk weather drawn from `P(W | p)`.
    pub fn expected_reward(&self, p: Pressure, action: Action) -> f64 {
        if !action.is_terminal() {
            return self.r_wait;
        }
        let sun = self.sun_given(p);
        sun * self.walk_reward(action, Weather::Sun) + (1.0 - sun) * self.walk_reward(action, Weather::Rain)
    }
}

impl Default for EnvParams {
    fn default() -> Self {
        Self::exp1()
    }
}

fn bernoulli(prob_one: f64, one: bool) -> f64 {
    if one {
        prob_one
    } else {
        1.0 - prob_one
    }
}

/// One joint `(P, B, W)` configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorldState {
    pub p: Pressure,
    pub b: Barometer,
    pub w: Weather,
}

impl WorldState {
    pub fn new(p: Pressure, b: Barometer, w: Weather) -> Self {
        WorldState { p, b, w }
    }

    /// `4p + 2b + w`.
    pub fn index(self) -> usize {
        self.p.bit() * 4 + self.b.bit() * 2 + self.w.bit()
    }

    pub fn from_index(i: usize) -> Self {
        debug_assert!(i < NUM_WORLD_STATES);
        WorldState {
            p: Pressure::from_bit(i & 4 != 0),
            b: Barometer::from_bit(i & 2 != 0),
            w: Weather::from_bit(i & 1 != 0),
        }
    }

    pub fn all() -> impl Iterator<Item = WorldState> {
        (0..NUM_WORLD_STATES).map(WorldState::from_index)
    }

    pub fn observe(self, pressure_visible: bool) -> Observation {
        Observation { b: self.b, w: self.w, p: pressure_visible.then_some(self.p) }
    }
}

/// Exact next-state distribution from pressure `p`, indexed by
/// [`WorldState::index`].
pub fn kernel(params: &EnvParams, p: Pressure, pressed: bool) -> [f64; NUM_WORLD_STATES] {
    let high = params.pressure_high_given(p);
    let sun = params.sun_given(p);
    let mut out = [0.0; NUM_WORLD_STATES];
    for (i, slot) in out.iter_mut().enumerate() {
        let s = WorldState::from_index(i);
        let p_next = bernoulli(high, s.p == Pressure::High);
        let b_next = bernoulli(params.barometer_high_given(s.p, pressed), s.b == Barometer::High);
        let w_next = bernoulli(sun, s.w == Weather::Sun);
        *slot = p_next * b_next * w_next;
    }
    out
}

/// Distribution of the first state: `P_{-1}` is drawn, then one unpressed
/// kernel step produces `(P_0, B_0, W_0)`.
pub fn initial_distribution(params: &EnvParams) -> [f64; NUM_WORLD_STATES] {
    let from_low = kernel(params, Pressure::Low, false);
    let from_high = kernel(params, Pressure::High, false);
    let h = params.p_initial_high;
    let mut out = [0.0; NUM_WORLD_STATES];
    for i in 0..NUM_WORLD_STATES {
        out[i] = (1.0 - h) * from_low[i] + h * from_high[i];
    }
    out
}

fn sample_next<R: Rng + ?Sized>(params: &EnvParams, p: Pressure, pressed: bool, rng: &mut R) -> WorldState {
    let p_next = Pressure::from_bit(rng.gen::<f64>() < params.pressure_high_given(p));
    let b_next = Barometer::from_bit(rng.gen::<f64>() < params.barometer_high_given(p_next, pressed));
    let w_next = Weather::from_bit(rng.gen::<f64>() < params.sun_given(p));
    WorldState::new(p_next, b_next, w_next)
}

/// What the agent gets to see.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observation {
    pub b: Barometer,
    pub w: Weather,
    /// Present iff pressure is visible.
    pub p: Option<Pressure>,
}

impl Observation {
    pub fn count(pressure_visible: bool) -> usize {
        if pressure_visible {
            8
        } else {
            4
        }
    }

    pub fn is_visible(&self) -> bool {
        self.p.is_some()
    }

    /// Dense index: `2b + w` when hidden, `4p + 2b + w` when visible.
    pub fn index(&self) -> usize {
        let bw = self.b.bit() * 2 + self.w.bit();
        match self.p {
            Some(p) => p.bit() * 4 + bw,
            None => bw,
        }
    }

    pub fn from_index(i: usize, pressure_visible: bool) -> Self {
        debug_assert!(i < Self::count(pressure_visible));
        Observation {
            b: Barometer::from_bit(i & 2 != 0),
            w: Weather::from_bit(i & 1 != 0),
            p: pressure_visible.then(|| Pressure::from_bit(i & 4 != 0)),
        }
    }

    pub fn all(pressure_visible: bool) -> impl Iterator<Item = Observation> {
        (0..Self::count(pressure_visible)).map(move |i| Self::from_index(i, pressure_visible))
    }

    /// Parse a compact token: `BW` (e.g. `HS`) or `PBW` (e.g. `LHR`).
    pub fn parse_token(token: &str) -> Option<Self> {
        let chars: Vec<char> = token.chars().collect();
        match chars.as_slice() {
            [b, w] => Some(Observation { b: Barometer::from_symbol(*b)?, w: Weather::from_symbol(*w)?, p: None }),
            [p, b, w] => Some(Observation {
                b: Barometer::from_symbol(*b)?,
                w: Weather::from_symbol(*w)?,
                p: Some(Pressure::from_symbol(*p)?),
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.p {
            write!(f, "{}", p.symbol())?;
        }
        write!(f, "{}{}", self.b.symbol(), self.w.symbol())
    }
}

/// One-hot per variable: `[P_low, P_high]` (visible only), then
/// `[B_low, B_high, W_rain, W_sun]`.
pub fn encode(obs: &Observation) -> Vec<f64> {
    let mut x = Vec::with_capacity(6);
    if let Some(p) = obs.p {
        x.extend(one_hot(p.bit()));
    }
    x.extend(one_hot(obs.b.bit()));
    x.extend(one_hot(obs.w.bit()));
    x
}

fn one_hot(bit: usize) -> [f64; 2] {
    let mut v = [0.0; 2];
    v[bit] = 1.0;
    v
}

pub fn encoded_len(pressure_visible: bool) -> usize {
    if pressure_visible {
        6
    } else {
        4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Exited,
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullState {
    pub world: WorldState,
    pub t: u32,
    pub status: Status,
}

/// Result of [`step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    /// The episode hit the step cap rather than exiting.
    pub truncated: bool,
    pub state: FullState,
}

/// A single `(o, a, r, o', done)` experience.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    /// The episode ended, either by exiting or by truncation.
    pub done: bool,
    pub truncated: bool,
}

impl TransitionRecord {
    /// True when the successor has no value: the dog went outside.
    pub fn terminal(&self) -> bool {
        self.done && !self.truncated
    }
}

pub fn reset<R: Rng + ?Sized>(params: &EnvParams, rng: &mut R) -> (Observation, FullState) {
    let p_prev = Pressure::from_bit(rng.gen::<f64>() < params.p_initial_high);
    let world = sample_next(params, p_prev, false, rng);
    let state = FullState { world, t: 0, status: Status::Running };
    (world.observe(params.pressure_visible), state)
}

/// Reset with a fresh random source derived from `seed`.
pub fn reset_seeded(params: &EnvParams, seed: u64) -> (Observation, FullState) {
    reset(params, &mut seeded_rng(seed))
}

pub fn step<R: Rng + ?Sized>(
    state: &FullState,
    action: Action,
    params: &EnvParams,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.status != Status::Running {
        return Err(Error::EpisodeFinished(state.status));
    }
    let t = state.t + 1;
    if action.is_terminal() {
        // The walk happens next period: its weather is a fresh draw given current pressure.
        let walk = Weather::from_bit(rng.gen::<f64>() < params.sun_given(state.world.p));
        let next = FullState { world: state.world, t, status: Status::Exited };
        return Ok(StepOutcome {
            obs: state.world.observe(params.pressure_visible),
            reward: params.walk_reward(action, walk),
            done: true,
            truncated: false,
            state: next,
        });
    }
    let world = sample_next(params, state.world.p, action == Action::Press, rng);
    let truncated = t >= params.t_max;
    let status = if truncated { Status::Truncated } else { Status::Running };
    Ok(StepOutcome {
        obs: world.observe(params.pressure_visible),
        reward: params.r_wait,
        done: truncated,
        truncated,
        state: FullState { world, t, status },
    })
}

/// Environment instance owning its random source.
#[derive(Clone, Debug)]
pub struct DogBarometerEnv {
    params: EnvParams,
    rng: SimRng,
    state: FullState,
    obs: Observation,
}

impl DogBarometerEnv {
    pub fn new(params: EnvParams, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let (obs, state) = reset(&params, &mut rng);
        DogBarometerEnv { params, rng, state, obs }
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn state(&self) -> &FullState {
        &self.state
    }

    pub fn observation(&self) -> Observation {
        self.obs
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn reset(&mut self) -> Observation {
        let (obs, state) = reset(&self.params, &mut self.rng);
        self.state = state;
        self.obs = obs;
        obs
    }

    pub fn step(&mut self, action: Action) -> Result<TransitionRecord> {
        let out = step(&self.state, action, &self.params, &mut self.rng)?;
        let record = TransitionRecord {
            obs: self.obs,
            action,
            reward: out.reward,
            next_obs: out.obs,
            done: out.done,
            truncated: out.truncated,
        };
        self.state = out.state;
        self.obs = out.obs;
        Ok(record)
    }
}
