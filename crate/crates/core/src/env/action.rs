use crate::env::config::MAX_SENSORS;
use crate::error::{Error, Result};

/// An update decision: bit `k` set means sensor `k` (0-based) is activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    bits: u32,
    index: usize,
}

impl Action {
    pub fn bits(self) -> u32 {
        self.bits
    }

    /// Position of this action in its [`ActionSpace`].
    pub fn index(self) -> usize {
        self.index
    }

    pub fn is_active(self, sensor: usize) -> bool {
        self.bits >> sensor & 1 == 1
    }

    pub fn count(self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_idle(self) -> bool {
        self.bits == 0
    }

    /// The activation vector a_1..a_K.
    pub fn to_vec(self, sensors: usize) -> Vec<bool> {
        (0..sensors).map(|k| self.is_active(k)).collect()
    }
}

/// Every bit-vector of length K with at most M ones, ordered by integer value
/// (sensor `k` contributes 2^k).
#[derive(Debug, Clone)]
pub struct ActionSpace {
    sensors: usize,
    max_updates: usize,
    masks: Vec<u32>,
    // mask -> index + 1, 0 for masks outside the space
    lookup: Vec<u32>,
}

impl ActionSpace {
    pub fn enumerate(sensors: usize, max_updates: usize) -> Result<Self> {
        if sensors == 0 || sensors > MAX_SENSORS {
            return Err(Error::InvalidArgument(format!(
                "sensor count must be in 1..={MAX_SENSORS}, got {sensors}"
            )));
        }
        if max_updates == 0 || max_updates > sensors {
            return Err(Error::InvalidArgument(format!(
                "max updates must be in 1..={sensors}, got {max_updates}"
            )));
        }
        let full = 1u32 << sensors;
        let masks: Vec<u32> = (0..full)
            .filter(|m| m.count_ones() as usize <= max_updates)
            .collect();
        let mut lookup = vec![0u32; full as usize];
        for (i, &m) in masks.iter().enumerate() {
            lookup[m as usize] = i as u32 + 1;
        }
        Ok(Self {
            sensors,
            max_updates,
            masks,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn max_updates(&self) -> usize {
        self.max_updates
    }

    pub fn get(&self, index: usize) -> Result<Action> {
        self.masks
            .get(index)
            .map(|&bits| Action { bits, index })
            .ok_or_else(|| {
                Error::InvalidAction(format!(
                    "index {index} outside action space of size {}",
                    self.len()
                ))
            })
    }

    pub fn from_bits(&self, bits: u32) -> Result<Action> {
        match self.lookup.get(bits as usize) {
            Some(&i) if i > 0 => Ok(Action {
                bits,
                index: i as usize - 1,
            }),
            _ => Err(Error::InvalidAction(format!(
                "bit-vector {bits:#b} is not in the action space (K={}, M={})",
                self.sensors, self.max_updates
            ))),
        }
    }

    pub fn from_vec(&self, a: &[bool]) -> Result<Action> {
        if a.len() != self.sensors {
            return Err(Error::InvalidAction(format!(
                "activation vector has length {}, expected {}",
                a.len(),
                self.sensors
            )));
        }
        let bits = a
            .iter()
            .enumerate()
            .fold(0u32, |acc, (k, &on)| acc | (u32::from(on) << k));
        self.from_bits(bits)
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        self.masks
            .iter()
            .enumerate()
            .map(|(index, &bits)| Action { bits, index })
    }
}
