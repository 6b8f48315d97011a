use std::collections::{BTreeMap, BTreeSet};

use super::{
    classify_kinds, Commerce, CommunicationPoint, CompanyRelationship, CustomerInfo,
    CustomerPattern, Location, LocationId, Party, PartyError, PartyId, PartyKind,
    RelationshipId, RelationshipType, Role,
};
use crate::time::SimTime;

/// Default width of a customer-pattern bucket, in ticks.
pub const DEFAULT_BUCKET_WIDTH: u64 = 10;

/// Owns every party, location and relationship, keeping references
/// resolvable at all times.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Registry {
    parties: BTreeMap<PartyId, Party>,
    locations: BTreeMap<LocationId, Location>,
    relationships: BTreeMap<RelationshipId, CompanyRelationship>,
    customer_infos: BTreeMap<RelationshipId, CustomerInfo>,
    patterns: BTreeMap<RelationshipId, CustomerPattern>,
    bucket_width: u64,
    next_party: u64,
    next_location: u64,
    next_relationship: u64,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new()
    }
}

impl Registry {
    pub fn new() -> Self {
        Registry::with_bucket_width(DEFAULT_BUCKET_WIDTH)
    }

    /// # Panics
    ///
    /// If `bucket_width` is zero.
    pub fn with_bucket_width(bucket_width: u64) -> Self {
        assert!(bucket_width > 0, "bucket width must be positive");
        Registry {
            parties: BTreeMap::new(),
            locations: BTreeMap::new(),
            relationships: BTreeMap::new(),
            customer_infos: BTreeMap::new(),
            patterns: BTreeMap::new(),
            bucket_width,
            next_party: 1,
            next_location: 1,
            next_relationship: 1,
        }
    }

    pub fn bucket_width(&self) -> u64 {
        self.bucket_width
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn add_location(&mut self, label: &str, address: &str) -> LocationId {
        let id = loop {
            let candidate = LocationId(format!("L{}", self.next_location));
            self.next_location += 1;
            if !self.locations.contains_key(&candidate) {
                break candidate;
            }
        };
        self.locations.insert(
            id.clone(),
            Location {
                id: id.clone(),
                label: label.to_owned(),
                address: address.to_owned(),
            },
        );
        id
    }

    pub fn insert_location(&mut self, location: Location) -> Result<(), PartyError> {
        if self.locations.contains_key(&location.id) {
            return Err(PartyError::DuplicateLocation(location.id));
        }
        self.locations.insert(location.id.clone(), location);
        Ok(())
    }

    pub fn location(&self, id: &LocationId) -> Option<&Location> {
        self.locations.get(id)
    }

    /// Registers a party under a freshly generated id.
    pub fn register_party(
        &mut self,
        kind: PartyKind,
        name: &str,
        locations: &[LocationId],
    ) -> Result<PartyId, PartyError> {
        self.check_party_fields(name, locations)?;
        let id = loop {
            let candidate = PartyId(format!("P{}", self.next_party));
            self.next_party += 1;
            if !self.parties.contains_key(&candidate) {
                break candidate;
            }
        };
        self.parties.insert(
            id.clone(),
            Party {
                id: id.clone(),
                kind,
                name: name.to_owned(),
                locations: locations.to_vec(),
                communication_points: Vec::new(),
                roles: BTreeSet::new(),
            },
        );
        Ok(id)
    }

    /// Registers a party whose id is chosen by the caller.
    pub fn insert_party(&mut self, party: Party) -> Result<(), PartyError> {
        self.check_party_fields(&party.name, &party.locations)?;
        if self.parties.contains_key(&party.id) {
            return Err(PartyError::DuplicateParty(party.id));
        }
        if party.communication_points.iter().any(|c| c.address.is_empty()) {
            return Err(PartyError::EmptyAddress);
        }
        self.parties.insert(party.id.clone(), party);
        Ok(())
    }

    fn check_party_fields(&self, name: &str, locations: &[LocationId]) -> Result<(), PartyError> {
        if name.trim().is_empty() {
            return Err(PartyError::EmptyName);
        }
        if let Some(missing) = locations.iter().find(|l| !self.locations.contains_key(*l)) {
            return Err(PartyError::UnknownLocation(missing.clone()));
        }
        Ok(())
    }

    pub fn party(&self, id: &PartyId) -> Option<&Party> {
        self.parties.get(id)
    }

    pub fn parties(&self) -> impl Iterator<Item = &Party> {
        self.parties.values()
    }

    pub fn add_role(&mut self, id: &PartyId, role: Role) -> Result<(), PartyError> {
        self.party_mut(id)?.roles.insert(role);
        Ok(())
    }

    pub fn add_communication_point(
        &mut self,
        id: &PartyId,
        point: CommunicationPoint,
    ) -> Result<(), PartyError> {
        if point.address.is_empty() {
            return Err(PartyError::EmptyAddress);
        }
        self.party_mut(id)?.communication_points.push(point);
        Ok(())
    }

    fn party_mut(&mut self, id: &PartyId) -> Result<&mut Party, PartyError> {
        self.parties
            .get_mut(id)
            .ok_or_else(|| PartyError::UnknownParty(id.clone()))
    }

    /// Removes a party that no relationship refers to.
    pub fn remove_party(&mut self, id: &PartyId) -> Result<Party, PartyError> {
        if !self.parties.contains_key(id) {
            return Err(PartyError::UnknownParty(id.clone()));
        }
        if self
            .relationships
            .values()
            .any(|r| r.from == *id || r.to == *id)
        {
            return Err(PartyError::PartyInUse(id.clone()));
        }
        Ok(self.parties.remove(id).expect("checked above"))
    }

    pub fn link_relationship(
        &mut self,
        from: &PartyId,
        to: &PartyId,
        rel_type: RelationshipType,
        start: SimTime,
    ) -> Result<RelationshipId, PartyError> {
        if from == to {
            return Err(PartyError::SelfRelationship);
        }
        for p in [from, to] {
            if !self.parties.contains_key(p) {
                return Err(PartyError::UnknownParty(p.clone()));
            }
        }
        let id = RelationshipId(self.next_relationship);
        self.next_relationship += 1;
        self.relationships.insert(
            id,
            CompanyRelationship {
                id,
                from: from.clone(),
                to: to.clone(),
                rel_type,
                start,
                end: None,
            },
        );
        Ok(id)
    }

    pub fn end_relationship(&mut self, id: RelationshipId, end: SimTime) -> Result<(), PartyError> {
        let rel = self
            .relationships
            .get_mut(&id)
            .ok_or(PartyError::UnknownRelationship(id))?;
        if end < rel.start {
            return Err(PartyError::EndBeforeStart);
        }
        rel.end = Some(end);
        Ok(())
    }

    pub fn relationship(&self, id: RelationshipId) -> Option<&CompanyRelationship> {
        self.relationships.get(&id)
    }

    pub fn relationships(&self) -> impl Iterator<Item = &CompanyRelationship> {
        self.relationships.values()
    }

    /// Every label describing how `a` relates to `b`, whichever direction the
    /// record was stored in. `at = None` ignores activity windows.
    pub fn relations_between(
        &self,
        a: &PartyId,
        b: &PartyId,
        at: Option<SimTime>,
    ) -> Vec<RelationshipType> {
        self.relationships
            .values()
            .filter(|r| at.is_none_or(|t| r.is_active_at(t)))
            .filter(|r| r.counterparty(a) == Some(b))
            .filter_map(|r| r.type_from(a))
            .collect()
    }

    /// Whether `supplier` is a `SupplierTo` of `buyer` at time `at`.
    pub fn is_supplier_to(&self, supplier: &PartyId, buyer: &PartyId, at: SimTime) -> bool {
        supplier != buyer
            && self
                .relations_between(supplier, buyer, Some(at))
                .contains(&RelationshipType::SupplierTo)
    }

    pub fn classify(&self, id: RelationshipId) -> Result<Commerce, PartyError> {
        let rel = self
            .relationships
            .get(&id)
            .ok_or(PartyError::UnknownRelationship(id))?;
        let kind = |p: &PartyId| self.parties[p].kind;
        classify_kinds(kind(&rel.from), kind(&rel.to))
    }

    pub fn add_customer_info(
        &mut self,
        relationship: RelationshipId,
        customer_code: &str,
    ) -> Result<(), PartyError> {
        let rel = self
            .relationships
            .get(&relationship)
            .ok_or(PartyError::UnknownRelationship(relationship))?;
        let seller = rel
            .seller()
            .ok_or(PartyError::NotCustomerRelationship(relationship))?
            .clone();
        if self.customer_infos.contains_key(&relationship) {
            return Err(PartyError::DuplicateCustomerInfo(relationship));
        }
        let clash = self.customer_infos.values().any(|info| {
            info.customer_code == customer_code
                && self.relationships[&info.relationship].seller() == Some(&seller)
        });
        if clash {
            return Err(PartyError::DuplicateCustomerCode {
                seller,
                code: customer_code.to_owned(),
            });
        }
        self.customer_infos.insert(
            relationship,
            CustomerInfo {
                relationship,
                customer_code: customer_code.to_owned(),
            },
        );
        Ok(())
    }

    pub fn customer_info(&self, relationship: RelationshipId) -> Option<&CustomerInfo> {
        self.customer_infos.get(&relationship)
    }

    /// Adds one interaction of `value` minor units to the bucket covering
    /// `time`. Buckets are half-open `[k·w, (k+1)·w)`.
    pub fn record_interaction(
        &mut self,
        relationship: RelationshipId,
        time: SimTime,
        value: i64,
    ) -> Result<&CustomerPattern, PartyError> {
        if !self.relationships.contains_key(&relationship) {
            return Err(PartyError::UnknownRelationship(relationship));
        }
        if value < 0 {
            return Err(PartyError::NegativeValue(value));
        }
        let period_start = SimTime(time.0 - time.0 % self.bucket_width);
        let pattern = self
            .patterns
            .entry(relationship)
            .or_insert_with(|| CustomerPattern {
                relationship,
                buckets: Vec::new(),
            });
        pattern.record(period_start, value as u64);
        Ok(pattern)
    }

    pub fn pattern(&self, relationship: RelationshipId) -> Option<&CustomerPattern> {
        self.patterns.get(&relationship)
    }

    /// Parties holding an active `CustomerOf` link toward `seller`.
    pub fn customers_of(
        &self,
        seller: &PartyId,
        at: SimTime,
    ) -> Result<BTreeSet<PartyId>, PartyError> {
        if !self.parties.contains_key(seller) {
            return Err(PartyError::UnknownParty(seller.clone()));
        }
        Ok(self
            .relationships
            .values()
            .filter(|r| r.is_active_at(at))
            .filter(|r| r.type_from(seller) == Some(RelationshipType::SellerTo))
            .filter_map(|r| r.counterparty(seller).cloned())
            .collect())
    }

    /// First active customer-flavored link between `seller` and `customer`.
    pub fn customer_relationship(
        &self,
        seller: &PartyId,
        customer: &PartyId,
        at: SimTime,
    ) -> Option<RelationshipId> {
        self.relationships
            .values()
            .filter(|r| r.is_active_at(at))
            .find(|r| {
                r.counterparty(seller) == Some(customer)
                    && r.type_from(seller) == Some(RelationshipType::SellerTo)
            })
            .map(|r| r.id)
    }
}
