use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::party::PartyId;

/// Source of raw 64-bit values for building seeded latency tables.
pub trait RandomSource {
    fn next_u64(&mut self) -> u64;
}

/// 64-bit linear congruential generator: `state ← state·a + c (mod 2⁶⁴)`,
/// returning the new state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }
}

impl RandomSource for Lcg64 {
    fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        self.state
    }
}

/// Maps the next raw value onto `lo..=hi`: the top 31 bits, reduced modulo
/// the range width. The low bits of an LCG are too regular to use directly.
pub fn draw_in_range<R: RandomSource + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    debug_assert!(lo <= hi);
    let raw = rng.next_u64() >> 33;
    lo + raw % (hi - lo + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Customer,
    Retailer,
    Warehouse,
    Manufacturer,
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentRole::Customer => "customer",
            AgentRole::Retailer => "retailer",
            AgentRole::Warehouse => "warehouse",
            AgentRole::Manufacturer => "manufacturer",
        })
    }
}

/// Ticks an envelope spends in flight between two agents.
///
/// Lookup order: an explicit role-pair entry, then a seeded per-agent-pair
/// entry, then the default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyTable {
    default: u64,
    roles: BTreeMap<PartyId, AgentRole>,
    by_role: BTreeMap<(AgentRole, AgentRole), u64>,
    by_pair: BTreeMap<(PartyId, PartyId), u64>,
}

impl LatencyTable {
    pub fn constant(default: u64) -> Self {
        LatencyTable {
            default,
            roles: BTreeMap::new(),
            by_role: BTreeMap::new(),
            by_pair: BTreeMap::new(),
        }
    }

    pub fn with_roles(mut self, roles: BTreeMap<PartyId, AgentRole>) -> Self {
        self.roles = roles;
        self
    }

    pub fn set_role_pair(&mut self, from: AgentRole, to: AgentRole, ticks: u64) {
        self.by_role.insert((from, to), ticks);
    }

    /// Fills a per-agent-pair table from `rng`. Pairs are visited with the
    /// sender in ascending id order, then the receiver in ascending id order,
    /// skipping self-pairs; one draw per pair.
    pub fn seed_pairs<R: RandomSource + ?Sized>(&mut self, rng: &mut R, lo: u64, hi: u64) {
        let agents: Vec<PartyId> = self.roles.keys().cloned().collect();
        for from in &agents {
            for to in &agents {
                if from != to {
                    let ticks = draw_in_range(rng, lo, hi);
                    self.by_pair.insert((from.clone(), to.clone()), ticks);
                }
            }
        }
    }

    pub fn latency(&self, from: &PartyId, to: &PartyId) -> u64 {
        let role_pair = self
            .roles
            .get(from)
            .zip(self.roles.get(to))
            .and_then(|(a, b)| self.by_role.get(&(*a, *b)));
        if let Some(t) = role_pair {
            return *t;
        }
        self.by_pair
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(self.default)
    }
}
