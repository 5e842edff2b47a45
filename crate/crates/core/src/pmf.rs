//! Exact distribution of capacity consumption over grid units.

use crate::error::{domain, Error, Result};

/// Overdraws up to this amount are absorbed instead of rejected.
pub const OVERDRAW_TOL: f64 = 1e-12;

/// Probability mass over consumption levels `0..=capacity` in grid units.
/// Stored densely: the grid is small and keys never move.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationPmf {
    mass: Vec<f64>,
}

impl UtilizationPmf {
    /// All mass on `at`.
    pub fn point_mass(capacity_units: u32, at: u32) -> Result<Self> {
        if at > capacity_units {
            return domain(format!("point {} beyond capacity {}", at, capacity_units));
        }
        let mut mass = vec![0.0; capacity_units as usize + 1];
        mass[at as usize] = 1.0;
        Ok(Self { mass })
    }

    /// Empty knapsack: all mass at zero consumption.
    pub fn empty(capacity_units: u32) -> Self {
        Self::point_mass(capacity_units, 0).expect("0 is always within capacity")
    }

    pub fn from_atoms(capacity_units: u32, atoms: &[(u32, f64)]) -> Result<Self> {
        let mut mass = vec![0.0; capacity_units as usize + 1];
        for &(u, m) in atoms {
            if u > capacity_units {
                return domain(format!("atom {} beyond capacity {}", u, capacity_units));
            }
            if !(m.is_finite() && m >= 0.0) {
                return domain(format!("atom mass {} is invalid", m));
            }
            mass[u as usize] += m;
        }
        Ok(Self { mass })
    }

    pub fn capacity_units(&self) -> u32 {
        (self.mass.len() - 1) as u32
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, u: u32) -> f64 {
        self.mass.get(u as usize).copied().unwrap_or(0.0)
    }

    /// Mass on `(a, b]`.
    pub fn mass_in(&self, a: u32, b: u32) -> Result<f64> {
        if a > b || b > self.capacity_units() {
            return domain(format!(
                "interval ({}, {}] invalid for capacity {}",
                a,
                b,
                self.capacity_units()
            ));
        }
        Ok(self.mass[a as usize + 1..=b as usize].iter().sum())
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `E[X]` in grid units.
    pub fn mean_units(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(u, m)| u as f64 * m)
            .sum()
    }

    /// Atoms with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(u, &m)| (u as u32, m))
    }

    /// Cumulative sums `S[i] = sum_{x <= i} mass(x)`.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    /// Shifts `amount` from `from` to `to`, returning the new pmf.
    pub fn move_mass(&self, from: u32, to: u32, amount: f64) -> Result<Self> {
        let mut out = self.clone();
        out.move_mass_in_place(from, to, amount)?;
        Ok(out)
    }

    /// In-place version of [`move_mass`](Self::move_mass). The amount taken
    /// from `from` is exactly the amount added to `to`.
    pub fn move_mass_in_place(&mut self, from: u32, to: u32, amount: f64) -> Result<()> {
        let cap = self.capacity_units();
        if from > cap || to > cap {
            return domain(format!("move {} -> {} outside capacity {}", from, to, cap));
        }
        if !(amount.is_finite() && amount >= 0.0) {
            return domain(format!("move amount {} is invalid", amount));
        }
        let avail = self.mass[from as usize];
        if amount > avail + OVERDRAW_TOL {
            return Err(Error::Overdraw {
                key: from,
                deficit: amount - avail,
            });
        }
        let moved = amount.min(avail);
        if from != to && moved > 0.0 {
            self.mass[from as usize] = avail - moved;
            self.mass[to as usize] += moved;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mass_in_examples() {
        let p = UtilizationPmf::empty(10);
        assert_eq!(p.mass_in(0, 10).unwrap(), 0.0);
        let p = UtilizationPmf::from_atoms(10, &[(0, 0.7), (5, 0.3)]).unwrap();
        assert!((p.mass_in(4, 5).unwrap() - 0.3).abs() < 1e-15);
        let p =
            UtilizationPmf::from_atoms(4, &[(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)]).unwrap();
        assert!((p.mass_in(2, 4).unwrap() - 0.5).abs() < 1e-15);
        assert!(p.mass_in(3, 2).is_err());
    }

    #[test]
    fn move_examples() {
        let p = UtilizationPmf::from_atoms(10, &[(3, 0.5), (0, 0.5)]).unwrap();
        assert_eq!(p.move_mass(3, 7, 0.0).unwrap(), p);
        let q = p.move_mass(3, 7, 0.2).unwrap();
        assert!((q.mass_at(3) - 0.3).abs() < 1e-15);
        assert!((q.mass_at(7) - 0.2).abs() < 1e-15);
        let full = UtilizationPmf::empty(10).move_mass(0, 10, 1.0).unwrap();
        assert_eq!(full.mass_at(10), 1.0);
        assert_eq!(full.mass_at(0), 0.0);
    }

    #[test]
    fn overdraw_reports_key_and_deficit() {
        let p = UtilizationPmf::from_atoms(4, &[(2, 0.1), (0, 0.9)]).unwrap();
        match p.move_mass(2, 3, 0.2) {
            Err(Error::Overdraw { key, deficit }) => {
                assert_eq!(key, 2);
                assert!((deficit - 0.1).abs() < 1e-15);
            }
            other => panic!("expected overdraw, got {:?}", other),
        }
        // A rounding-level overdraw is absorbed.
        let q = p.move_mass(2, 3, 0.1 + 5e-13).unwrap();
        assert_eq!(q.mass_at(2), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn long_move_sequences_conserve_mass(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cap = 50u32;
            let mut p = UtilizationPmf::empty(cap);
            for _ in 0..100_000 {
                let from = rng.gen_range(0..=cap);
                let to = rng.gen_range(0..=cap);
                let frac: f64 = rng.gen();
                let amt = p.mass_at(from) * frac;
                p.move_mass_in_place(from, to, amt).unwrap();
            }
            prop_assert!((p.total() - 1.0).abs() <= 1e-12);
            prop_assert!(p.masses().iter().all(|&m| m >= 0.0));
        }
    }
}
