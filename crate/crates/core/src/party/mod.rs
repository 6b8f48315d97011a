//! Trading-community CRM model.
//!
//! Parties are persons or organizations. A [`CompanyRelationship`] is a
//! single directed record `from --rel_type--> to`; the reverse view is
//! derived through [`RelationshipType::inverse`] instead of being stored
//! twice.

mod registry;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::units::is_token;

pub use registry::Registry;

/// Identifier of a party. Nonempty, whitespace-free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PartyId(String);

impl PartyId {
    pub fn new(id: impl Into<String>) -> Option<PartyId> {
        let id = id.into();
        is_token(&id).then_some(PartyId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PartyId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        PartyId::new(s.clone()).ok_or_else(|| format!("invalid party id {s:?}"))
    }
}

impl From<PartyId> for String {
    fn from(p: PartyId) -> String {
        p.0
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartyKind {
    Person,
    Organization,
}

/// Roles a party can play in the trading community. Roles are labels only;
/// they do not imply a relationship type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Seller,
    Buyer,
    Partner,
    Contractor,
    Distributor,
    Dealer,
    Agent,
    Influencer,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub String);

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    pub label: String,
    pub address: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Phone,
    Email,
    Postal,
    Web,
}

/// A point of contact for a party.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunicationPoint {
    pub channel: Channel,
    pub address: String,
    #[serde(default)]
    pub purpose: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Party {
    pub id: PartyId,
    pub kind: PartyKind,
    pub name: String,
    pub locations: Vec<LocationId>,
    pub communication_points: Vec<CommunicationPoint>,
    pub roles: BTreeSet<Role>,
}

/// Directed relationship label. Each label has exactly one inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationshipType {
    SupplierTo,
    DistributorFor,
    ClientOf,
    ContractorTo,
    ReportTo,
    ManagerOf,
    CustomerOf,
    SellerTo,
}

impl RelationshipType {
    pub const ALL: [RelationshipType; 8] = [
        RelationshipType::SupplierTo,
        RelationshipType::DistributorFor,
        RelationshipType::ClientOf,
        RelationshipType::ContractorTo,
        RelationshipType::ReportTo,
        RelationshipType::ManagerOf,
        RelationshipType::CustomerOf,
        RelationshipType::SellerTo,
    ];

    /// The label seen from the other endpoint.
    pub fn inverse(self) -> RelationshipType {
        use RelationshipType::*;
        match self {
            SupplierTo => DistributorFor,
            DistributorFor => SupplierTo,
            ClientOf => ContractorTo,
            ContractorTo => ClientOf,
            ReportTo => ManagerOf,
            ManagerOf => ReportTo,
            CustomerOf => SellerTo,
            SellerTo => CustomerOf,
        }
    }

    /// Whether the label describes a customer/seller link.
    pub fn is_customer_flavored(self) -> bool {
        matches!(self, RelationshipType::CustomerOf | RelationshipType::SellerTo)
    }
}

/// Free-function form of [`RelationshipType::inverse`].
pub fn inverse_of(t: RelationshipType) -> RelationshipType {
    t.inverse()
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RelationshipId(pub u64);

impl fmt::Display for RelationshipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompanyRelationship {
    pub id: RelationshipId,
    pub from: PartyId,
    pub to: PartyId,
    pub rel_type: RelationshipType,
    pub start: SimTime,
    pub end: Option<SimTime>,
}

impl CompanyRelationship {
    /// Active on the half-open interval `[start, end)`.
    pub fn is_active_at(&self, at: SimTime) -> bool {
        self.start <= at && self.end.is_none_or(|end| at < end)
    }

    /// The label as seen from `party`, if `party` is an endpoint.
    pub fn type_from(&self, party: &PartyId) -> Option<RelationshipType> {
        if *party == self.from {
            Some(self.rel_type)
        } else if *party == self.to {
            Some(self.rel_type.inverse())
        } else {
            None
        }
    }

    /// The other endpoint.
    pub fn counterparty(&self, party: &PartyId) -> Option<&PartyId> {
        if *party == self.from {
            Some(&self.to)
        } else if *party == self.to {
            Some(&self.from)
        } else {
            None
        }
    }

    /// For customer-flavored links, the selling endpoint.
    pub fn seller(&self) -> Option<&PartyId> {
        match self.rel_type {
            RelationshipType::SellerTo => Some(&self.from),
            RelationshipType::CustomerOf => Some(&self.to),
            _ => None,
        }
    }
}

/// Business-to-business or business-to-customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Commerce {
    B2B,
    B2C,
}

/// Classification by endpoint kinds. Order-insensitive.
pub fn classify_kinds(a: PartyKind, b: PartyKind) -> Result<Commerce, PartyError> {
    match (a, b) {
        (PartyKind::Organization, PartyKind::Organization) => Ok(Commerce::B2B),
        (PartyKind::Person, PartyKind::Person) => Err(PartyError::UnsupportedPair),
        _ => Ok(Commerce::B2C),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CustomerInfo {
    pub relationship: RelationshipId,
    pub customer_code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatternBucket {
    pub period_start: SimTime,
    pub order_count: u64,
    pub total_value: u64,
}

/// Per-relationship activity histogram; buckets ascend strictly by start.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CustomerPattern {
    pub relationship: RelationshipId,
    pub buckets: Vec<PatternBucket>,
}

impl CustomerPattern {
    fn record(&mut self, period_start: SimTime, value: u64) {
        match self
            .buckets
            .binary_search_by_key(&period_start, |b| b.period_start)
        {
            Ok(i) => {
                let b = &mut self.buckets[i];
                b.order_count += 1;
                b.total_value += value;
            }
            Err(i) => self.buckets.insert(
                i,
                PatternBucket {
                    period_start,
                    order_count: 1,
                    total_value: value,
                },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartyError {
    #[error("party name must not be empty")]
    EmptyName,
    #[error("invalid party id {0:?}")]
    InvalidId(String),
    #[error("unknown location {0}")]
    UnknownLocation(LocationId),
    #[error("duplicate location {0}")]
    DuplicateLocation(LocationId),
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
    #[error("duplicate party {0}")]
    DuplicateParty(PartyId),
    #[error("party {0} is referenced by a relationship")]
    PartyInUse(PartyId),
    #[error("a party cannot be related to itself")]
    SelfRelationship,
    #[error("relationship end precedes its start")]
    EndBeforeStart,
    #[error("unknown relationship {0}")]
    UnknownRelationship(RelationshipId),
    #[error("person-to-person relationships are neither B2B nor B2C")]
    UnsupportedPair,
    #[error("relationship {0} is not a customer relationship")]
    NotCustomerRelationship(RelationshipId),
    #[error("customer info already recorded for relationship {0}")]
    DuplicateCustomerInfo(RelationshipId),
    #[error("customer code {code:?} already used by seller {seller}")]
    DuplicateCustomerCode { seller: PartyId, code: String },
    #[error("interaction value {0} is negative")]
    NegativeValue(i64),
    #[error("communication point address must not be empty")]
    EmptyAddress,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_is_an_involution() {
        for t in RelationshipType::ALL {
            assert_eq!(inverse_of(inverse_of(t)), t);
            assert_ne!(inverse_of(t), t);
        }
    }

    #[test]
    fn stated_pairs() {
        use RelationshipType::*;
        assert_eq!(inverse_of(SupplierTo), DistributorFor);
        assert_eq!(inverse_of(CustomerOf), SellerTo);
        assert_eq!(inverse_of(ClientOf), ContractorTo);
        assert_eq!(inverse_of(ReportTo), ManagerOf);
    }

    #[test]
    fn classify_pairs() {
        use PartyKind::*;
        assert_eq!(classify_kinds(Organization, Organization), Ok(Commerce::B2B));
        assert_eq!(classify_kinds(Organization, Person), Ok(Commerce::B2C));
        assert_eq!(classify_kinds(Person, Organization), Ok(Commerce::B2C));
        assert_eq!(classify_kinds(Person, Person), Err(PartyError::UnsupportedPair));
    }

    #[test]
    fn party_id_rejects_blank_and_whitespace() {
        assert!(PartyId::new("").is_none());
        assert!(PartyId::new("a b").is_none());
        assert!(PartyId::new("RetailCo").is_some());
    }
}
