//! Derived parameters of the routing algorithm as functions of k.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Every value from its formula.
    #[default]
    Paper,
    /// Overrides that keep every stage non-degenerate for k ≤ 128.
    Desk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamConfig {
    pub profile: Profile,
    pub c_gamma: f64,
    pub c_beta: f64,
    pub alpha_arv: Option<u32>,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig { profile: Profile::Paper, c_gamma: 1.0, c_beta: 1.0, alpha_arv: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub k: u64,
    pub profile: Profile,
    pub log_base: u32,
    pub gamma: u64,
    pub alpha_arv: u64,
    /// 1 / (2^11 · γ · log k).
    pub alpha: f64,
    pub alpha_wl: f64,
    pub beta: u64,
    pub k1: u64,
    pub p: u64,
    pub k_star: u64,
    pub k_prime: u64,
    /// Divisor used for the Z threshold, A(e) and k′ (γ³ under the formulas).
    pub sigma: u64,
    /// Congestion budget of good-family flow certificates, ⌈2β/α_WL⌉.
    pub eta: u64,
    /// Names of the values replaced by the profile.
    pub overridden: Vec<String>,
}

fn log2(x: f64) -> f64 {
    x.log2()
}

/// β(n) = ⌈c_β · log₂(n + 2)⌉.
pub fn beta_of(n: u64, c_beta: f64) -> u64 {
    (c_beta * log2(n as f64 + 2.0)).ceil().max(1.0) as u64
}

impl ParamTable {
    pub fn new(k: u64, cfg: &ParamConfig) -> Self {
        let lk = log2(k.max(1) as f64);
        let formula_gamma = (cfg.c_gamma * lk * lk).ceil().max(1.0) as u64;
        let mut overridden = vec![];
        let gamma = match cfg.profile {
            Profile::Paper => formula_gamma,
            Profile::Desk => {
                overridden.push("gamma".to_string());
                2
            }
        };
        let alpha_arv = cfg.alpha_arv.map(u64::from).unwrap_or_else(|| lk.sqrt().ceil().max(1.0) as u64);
        let alpha = if lk > 0.0 { 1.0 / (2048.0 * gamma as f64 * lk) } else { 0.0 };
        let alpha_wl = alpha / alpha_arv as f64;
        let beta = beta_of(k, cfg.c_beta);
        let g3 = gamma.pow(3);
        let (k1, p, k_star, sigma) = match cfg.profile {
            Profile::Paper => {
                let lg = log2(gamma as f64);
                let k1 = if lg > 0.0 { (k as f64 / (192.0 * g3 as f64 * lg)).floor() as u64 } else { 0 };
                let p = if alpha_wl > 0.0 { (8.0 * beta as f64 / alpha_wl).ceil() as u64 } else { u64::MAX };
                let k_star = if p > 0 && p < u64::MAX / 8 { k1 / (6 * p) } else { 0 };
                (k1, p, k_star, g3)
            }
            Profile::Desk => {
                overridden.extend(["k1", "p", "k_star", "sigma"].map(String::from));
                (k, 1, k / 3, 1)
            }
        };
        let k_prime = 2 * (k_star / (4 * sigma));
        let eta = if alpha_wl > 0.0 { (2.0 * beta as f64 / alpha_wl).ceil() as u64 } else { u64::MAX };
        ParamTable {
            k,
            profile: cfg.profile,
            log_base: 2,
            gamma,
            alpha_arv,
            alpha,
            alpha_wl,
            beta,
            k1,
            p,
            k_star,
            k_prime,
            sigma,
            eta,
            overridden,
        }
    }

    /// All values the construction divides by or sizes sets with are positive.
    pub fn feasible(&self) -> bool {
        self.k >= 2 && self.gamma >= 2 && self.alpha > 0.0 && self.k1 > 0 && self.p > 0 && self.k_star > 0 && self.k_prime >= 2
    }

    /// Smallest k whose table is feasible under `cfg`, searched up to `limit`.
    pub fn min_feasible_k(cfg: &ParamConfig, limit: u64) -> Option<u64> {
        (2..=limit).find(|&k| ParamTable::new(k, cfg).feasible())
    }

    /// ℓ used when building trees: 2k*.
    pub fn ell(&self) -> u64 {
        2 * self.k_star
    }

    /// Budget used when routing inside clusters, capped to keep flow networks finite.
    pub fn eta_capped(&self) -> u32 {
        self.eta.min(1 << 20) as u32
    }
}
