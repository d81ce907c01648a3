use super::rng::SeededRng;

/// Ornstein-Uhlenbeck process used as temporally correlated action noise.
#[derive(Debug, Clone)]
pub struct OuProcess {
    pub state: Vec<f64>,
    /// Mean-reversion rate (1/s).
    pub rate: f64,
    /// Volatility (action-units / sqrt(s)).
    pub volatility: f64,
    /// Time step (s).
    pub dt: f64,
}

impl OuProcess {
    pub fn new(dim: usize, rate: f64, volatility: f64, dt: f64) -> Self {
        OuProcess {
            state: vec![0.0; dim],
            rate,
            volatility,
            dt,
        }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    /// Advance one step: x += rate*(0 - x)*dt + volatility*sqrt(dt)*N(0,1).
    pub fn step(&mut self, rng: &mut SeededRng) -> &[f64] {
        let sd = self.volatility * self.dt.sqrt();
        for s in self.state.iter_mut() {
            *s += self.rate * (0.0 - *s) * self.dt + sd * rng.gaussian();
        }
        &self.state
    }
}
