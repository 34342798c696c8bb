use serde::{Deserialize, Serialize};

use crate::config::{parse_list, KeyValues};
use crate::error::{Error, Result};

/// Largest sensor count for which the action space is enumerated explicitly.
pub const MAX_SENSORS: usize = 16;

/// Default sensor transmit power in mW.
pub const DEFAULT_TX_POWER_MW: f64 = 10.0;

/// Static description of the network.
///
/// AoI quantities are integer slot counts. Energies are in mJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// K, number of sensors.
    pub sensors: usize,
    /// N, number of users.
    pub users: usize,
    /// M, maximum number of sensors activated in one step.
    pub max_updates: usize,
    /// D_u, slots of the status update phase.
    pub sup_slots: u32,
    /// D_d, slots of the data delivery phase.
    pub ddp_slots: u32,
    pub slot_seconds: f64,
    /// Δ_max, AoI cap in slots.
    pub aoi_max: u32,
    /// P_n, probability that user n issues a request in a step.
    pub request_prob: Vec<f64>,
    /// Row n: distribution over the sensor requested by user n.
    pub popularity: Vec<Vec<f64>>,
    /// p_O^k, transmission failure probability of sensor k.
    pub fail_prob: Vec<f64>,
    /// E_{k,s}
    pub energy_sense: Vec<f64>,
    /// E_{k,u}
    pub energy_tx: Vec<f64>,
    /// ω_n
    pub weights: Vec<f64>,
    /// β1, weight of the AoI cost.
    pub beta_aoi: f64,
    /// β2, weight of the energy cost.
    pub beta_energy: f64,
}

impl EnvConfig {
    /// The reference scenario: M = K/2, D_u = D_d = 1 slot of 1 s,
    /// Δ_max = 10·K·(D_u + D_d), P_n = 0.6 with uniform popularity,
    /// p_O^k = 0.025·⌈k/2⌉, 10 mW transmit power with equal sensing energy,
    /// equal user weights and β1 = β2 = 1.
    pub fn paper(sensors: usize, users: usize) -> Self {
        let sup_slots = 1;
        let ddp_slots = 1;
        let slot_seconds = 1.0;
        let e = DEFAULT_TX_POWER_MW * f64::from(sup_slots) * slot_seconds;
        Self {
            sensors,
            users,
            max_updates: (sensors / 2).max(1),
            sup_slots,
            ddp_slots,
            slot_seconds,
            aoi_max: 10 * sensors as u32 * (sup_slots + ddp_slots),
            request_prob: vec![0.6; users],
            popularity: vec![vec![1.0 / sensors as f64; sensors]; users],
            fail_prob: default_fail_prob(sensors),
            energy_sense: vec![e; sensors],
            energy_tx: vec![e; sensors],
            weights: vec![1.0 / users as f64; users],
            beta_aoi: 1.0,
            beta_energy: 1.0,
        }
    }

    /// E_k = E_{k,s} + E_{k,u}.
    pub fn update_energy(&self, k: usize) -> f64 {
        self.energy_sense[k] + self.energy_tx[k]
    }

    /// Length of the encoded state vector, K·(N+1).
    pub fn state_dim(&self) -> usize {
        self.sensors * (self.users + 1)
    }

    /// −(β1·Δ_max + β2·(energy of the M most expensive updates)); the
    /// worst per-step reward, used to initialize the average-reward estimate.
    pub fn worst_case_reward(&self) -> f64 {
        let mut e: Vec<f64> = (0..self.sensors).map(|k| self.update_energy(k)).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        let energy: f64 = e.iter().take(self.max_updates).sum();
        -(self.beta_aoi * f64::from(self.aoi_max) + self.beta_energy * energy)
    }

    pub fn validate(&self) -> Result<()> {
        let (k, n) = (self.sensors, self.users);
        let err = |msg: String| Err(Error::Config(msg));
        if k == 0 || k > MAX_SENSORS {
            return err(format!("sensors must be in 1..={MAX_SENSORS}, got {k}"));
        }
        if n == 0 {
            return err("users must be positive".into());
        }
        if self.max_updates == 0 || self.max_updates > k {
            return err(format!(
                "max_updates must be in 1..={k}, got {}",
                self.max_updates
            ));
        }
        if self.sup_slots == 0 || self.ddp_slots == 0 {
            return err("sup_slots and ddp_slots must be positive".into());
        }
        if !(self.slot_seconds > 0.0 && self.slot_seconds.is_finite()) {
            return err("slot_seconds must be positive".into());
        }
        if self.aoi_max < self.sup_slots + self.ddp_slots {
            return err(format!(
                "aoi_max {} is below sup_slots + ddp_slots",
                self.aoi_max
            ));
        }
        check_len("request_prob", &self.request_prob, n)?;
        check_len("weights", &self.weights, n)?;
        check_len("fail_prob", &self.fail_prob, k)?;
        check_len("energy_sense", &self.energy_sense, k)?;
        check_len("energy_tx", &self.energy_tx, k)?;
        if self.popularity.len() != n {
            return err(format!("popularity has {} rows, expected {n}", self.popularity.len()));
        }
        for (name, v) in [("request_prob", &self.request_prob), ("fail_prob", &self.fail_prob)] {
            if let Some(p) = v.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return err(format!("{name} entry {p} outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("energy_sense", &self.energy_sense),
            ("energy_tx", &self.energy_tx),
            ("weights", &self.weights),
        ] {
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return err(format!("{name} entry {x} must be finite and non-negative"));
            }
        }
        let wsum: f64 = self.weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return err(format!("weights sum to {wsum}, expected 1"));
        }
        for (i, row) in self.popularity.iter().enumerate() {
            check_len("popularity row", row, k)?;
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return err(format!("popularity row {i} has a negative entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return err(format!("popularity row {i} sums to {s}, expected 1"));
            }
        }
        for (name, b) in [("beta_aoi", self.beta_aoi), ("beta_energy", self.beta_energy)] {
            if !(b.is_finite() && b >= 0.0) {
                return err(format!("{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Reads the environment keys from `kv`, starting from [`EnvConfig::paper`]
    /// for the given `sensors` and `users` (defaults 8 and 24).
    ///
    /// Keys: `sensors`, `users`, `max_updates`, `sup_slots`, `ddp_slots`,
    /// `slot_seconds`, `aoi_max`, `request_prob`, `popularity` (`uniform` or
    /// `;`-separated rows), `fail_prob`, `tx_power_mw`, `energy_sense`,
    /// `energy_tx`, `weights`, `beta_aoi`, `beta_energy`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let k = kv.get::<usize>("sensors")?.unwrap_or(8);
        let n = kv.get::<usize>("users")?.unwrap_or(24);
        if k == 0 || k > MAX_SENSORS || n == 0 {
            return Err(Error::Config(format!(
                "sensors must be in 1..={MAX_SENSORS} and users positive"
            )));
        }
        let mut c = Self::paper(k, n);
        if let Some(v) = kv.get("max_updates")? {
            c.max_updates = v;
        }
        if let Some(v) = kv.get("sup_slots")? {
            c.sup_slots = v;
        }
        if let Some(v) = kv.get("ddp_slots")? {
            c.ddp_slots = v;
        }
        if let Some(v) = kv.get("slot_seconds")? {
            c.slot_seconds = v;
        }
        c.aoi_max = match kv.get("aoi_max")? {
            Some(v) => v,
            None => 10 * k as u32 * (c.sup_slots + c.ddp_slots),
        };
        if let Some(v) = kv.get_list("request_prob", n)? {
            c.request_prob = v;
        }
        if let Some(v) = kv.raw("popularity") {
            c.popularity = parse_popularity(v, n, k)?;
        }
        if let Some(v) = kv.get_list("fail_prob", k)? {
            c.fail_prob = v;
        }
        let power: f64 = kv.get("tx_power_mw")?.unwrap_or(DEFAULT_TX_POWER_MW);
        let e = power * f64::from(c.sup_slots) * c.slot_seconds;
        c.energy_tx = kv.get_list("energy_tx", k)?.unwrap_or_else(|| vec![e; k]);
        c.energy_sense = kv
            .get_list("energy_sense", k)?
            .unwrap_or_else(|| c.energy_tx.clone());
        if let Some(v) = kv.get_list("weights", n)? {
            c.weights = v;
        }
        if let Some(v) = kv.get("beta_aoi")? {
            c.beta_aoi = v;
        }
        if let Some(v) = kv.get("beta_energy")? {
            c.beta_energy = v;
        }
        c.validate()?;
        Ok(c)
    }

    /// Writes the configuration in the format read by
    /// [`EnvConfig::from_key_values`].
    pub fn to_key_values(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
        }
        let pop = self
            .popularity
            .iter()
            .map(|r| list(r))
            .collect::<Vec<_>>()
            .join("; ");
        format!(
            "sensors = {}\nusers = {}\nmax_updates = {}\nsup_slots = {}\nddp_slots = {}\n\
             slot_seconds = {}\naoi_max = {}\nrequest_prob = {}\npopularity = {}\n\
             fail_prob = {}\nenergy_sense = {}\nenergy_tx = {}\nweights = {}\n\
             beta_aoi = {}\nbeta_energy = {}\n",
            self.sensors,
            self.users,
            self.max_updates,
            self.sup_slots,
            self.ddp_slots,
            self.slot_seconds,
            self.aoi_max,
            list(&self.request_prob),
            pop,
            list(&self.fail_prob),
            list(&self.energy_sense),
            list(&self.energy_tx),
            list(&self.weights),
            self.beta_aoi,
            self.beta_energy,
        )
    }
}

/// p_O^k = 0.025·⌈k/2⌉ with 1-based k.
pub fn default_fail_prob(sensors: usize) -> Vec<f64> {
    (1..=sensors).map(|k| 0.025 * k.div_ceil(2) as f64).collect()
}

fn parse_popularity(v: &str, users: usize, sensors: usize) -> Result<Vec<Vec<f64>>> {
    if v.trim() == "uniform" {
        return Ok(vec![vec![1.0 / sensors as f64; sensors]; users]);
    }
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|r| parse_list::<f64>("popularity", r))
        .collect::<Result<_>>()?;
    match rows.len() {
        1 => Ok(vec![rows[0].clone(); users]),
        n if n == users => Ok(rows),
        n => Err(Error::Config(format!(
            "popularity has {n} rows, expected 1 or {users}"
        ))),
    }
}

fn check_len<T>(name: &str, v: &[T], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::Config(format!(
            "{name} has {} entries, expected {len}",
            v.len()
        )));
    }
    Ok(())
}
