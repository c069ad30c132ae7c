//! First-order radio energy model with integer picojoule accounting.
//!
//! Costs are kept as whole picojoules so that per-node debits sum exactly
//! and `initial - remaining` always equals the recorded total.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

/// Non-negative amount of energy in picojoules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Energy(u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);
    pub const INFINITE: Energy = Energy(u64::MAX);

    pub const fn from_picojoules(pj: u64) -> Self {
        Energy(pj)
    }

    pub fn from_joules(j: f64) -> Self {
        Energy((j * 1e12).round().max(0.0) as u64)
    }

    pub const fn picojoules(self) -> u64 {
        self.0
    }

    pub fn joules(self) -> f64 {
        self.0 as f64 / 1e12
    }

    pub fn is_infinite(self) -> bool {
        self.0 == u64::MAX
    }

    pub fn saturating_add(self, other: Energy) -> Energy {
        Energy(self.0.saturating_add(other.0))
    }

    pub fn saturating_sub(self, other: Energy) -> Energy {
        Energy(self.0.saturating_sub(other.0))
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        self.saturating_add(rhs)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        *self = *self + rhs;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, Add::add)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{} J", self.joules())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadioOp {
    Tx,
    Rx,
}

/// `E_tx = E_elec·k + ε_amp·k·d²`, `E_rx = E_elec·k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyModel {
    pub elec_pj_per_bit: u64,
    pub amp_pj_per_bit_m2: f64,
    pub initial: Energy,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            elec_pj_per_bit: 50_000,
            amp_pj_per_bit_m2: 100.0,
            initial: Energy::from_joules(2.0),
        }
    }
}

impl EnergyModel {
    pub fn tx_cost_sq(&self, bits: u64, dist_sq: f64) -> Energy {
        let amp = (self.amp_pj_per_bit_m2 * bits as f64 * dist_sq).round() as u64;
        Energy(self.elec_pj_per_bit * bits + amp)
    }

    pub fn tx_cost(&self, bits: u64, distance: f64) -> Energy {
        self.tx_cost_sq(bits, distance * distance)
    }

    pub fn rx_cost(&self, bits: u64) -> Energy {
        Energy(self.elec_pj_per_bit * bits)
    }

    pub fn cost(&self, op: RadioOp, bits: u64, distance: f64) -> Energy {
        match op {
            RadioOp::Tx => self.tx_cost(bits, distance),
            RadioOp::Rx => self.rx_cost(bits),
        }
    }

    pub fn account(&self) -> EnergyAccount {
        EnergyAccount::new(self.initial)
    }
}

/// Per-node battery. `remaining` only decreases and never drops below zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnergyAccount {
    initial: Energy,
    remaining: Energy,
    tx_count: u64,
    rx_count: u64,
}

impl EnergyAccount {
    pub fn new(initial: Energy) -> Self {
        EnergyAccount {
            initial,
            remaining: initial,
            tx_count: 0,
            rx_count: 0,
        }
    }

    pub fn initial(&self) -> Energy {
        self.initial
    }
    pub fn remaining(&self) -> Energy {
        self.remaining
    }
    pub fn consumed(&self) -> Energy {
        self.initial - self.remaining
    }
    pub fn tx_count(&self) -> u64 {
        self.tx_count
    }
    pub fn rx_count(&self) -> u64 {
        self.rx_count
    }
    pub fn depleted(&self) -> bool {
        self.remaining == Energy::ZERO
    }

    /// Removes charge outside any radio operation, e.g. to model an earlier
    /// workload. Clamped at the remaining charge.
    pub fn drain(&mut self, amount: Energy) {
        self.remaining = self.remaining - amount.min(self.remaining);
    }

    /// Debits `cost` (clamped at the remaining charge) and returns the amount
    /// actually taken.
    pub fn debit(&mut self, op: RadioOp, cost: Energy) -> Energy {
        let taken = cost.min(self.remaining);
        self.remaining = self.remaining - taken;
        match op {
            RadioOp::Tx => self.tx_count += 1,
            RadioOp::Rx => self.rx_count += 1,
        }
        taken
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_tx_is_electronics_only() {
        let m = EnergyModel::default();
        assert_eq!(m.tx_cost(1000, 0.0), m.rx_cost(1000));
        assert_eq!(m.rx_cost(1000), Energy::from_picojoules(50_000_000));
    }

    #[test]
    fn reference_substitution() {
        // 8000 bits over 100 m: 0.0004 J electronics + 0.008 J amplifier.
        let m = EnergyModel::default();
        assert_eq!(m.tx_cost(8000, 100.0), Energy::from_joules(0.0084));
        assert_eq!(m.cost(RadioOp::Rx, 8000, 100.0), Energy::from_joules(0.0004));
    }

    #[test]
    fn debit_clamps_at_zero() {
        let mut a = EnergyAccount::new(Energy::from_picojoules(10));
        assert_eq!(a.debit(RadioOp::Tx, Energy::from_picojoules(4)), Energy::from_picojoules(4));
        assert_eq!(a.debit(RadioOp::Rx, Energy::from_picojoules(40)), Energy::from_picojoules(6));
        assert!(a.depleted());
        assert_eq!(a.consumed(), a.initial());
        assert_eq!((a.tx_count(), a.rx_count()), (1, 1));
    }
}
