#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcsim_core::engine::RandomSource;
use vcsim_core::party::{PartyKind, RelationshipType, Role};
use vcsim_core::scenario::{
    AgentsSpec, CatalogSpec, LatencySpec, ManufacturerAgentSpec, OrderSpec, ParamsSpec, PartySpec,
    RelationshipSpec, ScenarioFile, StockSpec, WarehouseAgentSpec,
};

/// The LCG again, written from its definition with 128-bit arithmetic.
pub struct WideLcg(pub u128);

impl RandomSource for WideLcg {
    fn next_u64(&mut self) -> u64 {
        const A: u128 = 6364136223846793005;
        const C: u128 = 1442695040888963407;
        self.0 = (self.0 * A + C) % (1u128 << 64);
        self.0 as u64
    }
}

pub struct FuzzLimits {
    pub max_warehouses: usize,
    pub max_orders: usize,
    /// Fraction of scenarios that inject duplicate `POSubmit`s.
    pub duplicate_rate: f64,
    /// Upper bound for seeded initial stock per warehouse and sku.
    pub max_stock: u64,
}

impl Default for FuzzLimits {
    fn default() -> Self {
        FuzzLimits {
            max_warehouses: 5,
            max_orders: 200,
            duplicate_rate: 0.2,
            max_stock: 40,
        }
    }
}

fn party(id: &str, kind: PartyKind, roles: &[Role]) -> PartySpec {
    PartySpec {
        id: id.to_owned(),
        kind,
        name: format!("party {id}"),
        locations: Vec::new(),
        roles: roles.to_vec(),
        communication_points: Vec::new(),
    }
}

fn rel(from: &str, to: &str, rel_type: RelationshipType) -> RelationshipSpec {
    RelationshipSpec {
        from: from.to_owned(),
        to: to.to_owned(),
        rel_type,
        start: 0,
        end: None,
        customer_code: None,
    }
}

/// A random valid scenario. The same seed always gives the same file.
pub fn fuzz_scenario(seed: u64, limits: &FuzzLimits) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_w = rng.gen_range(1..=limits.max_warehouses);
    let n_m = rng.gen_range(1..=n_w.min(3));
    let n_c = rng.gen_range(1..=6);
    let n_sku = rng.gen_range(1..=4);
    let skus: Vec<String> = (0..n_sku).map(|i| format!("S{i}")).collect();

    let mut parties = vec![party("R", PartyKind::Organization, &[Role::Seller])];
    let mut relationships = Vec::new();
    let mut warehouses = Vec::new();
    let mut manufacturers = Vec::new();
    for m in 1..=n_m {
        parties.push(party(&format!("M{m}"), PartyKind::Organization, &[Role::Seller]));
        manufacturers.push(ManufacturerAgentSpec {
            id: format!("M{m}"),
            production_delay: rng.gen_range(1..=6),
        });
    }
    for w in 1..=n_w {
        let id = format!("W{w}");
        let m = format!("M{}", rng.gen_range(1..=n_m));
        parties.push(party(&id, PartyKind::Organization, &[Role::Distributor]));
        if rng.gen_bool(0.5) {
            relationships.push(rel(&m, &id, RelationshipType::SupplierTo));
        } else {
            relationships.push(rel(&id, &m, RelationshipType::DistributorFor));
        }
        warehouses.push(WarehouseAgentSpec {
            id,
            manufacturer: m,
            reorder_qty: rng.gen_range(1..=30),
        });
    }
    let mut customers = Vec::new();
    for c in 1..=n_c {
        let id = format!("C{c}");
        let kind = if rng.gen_bool(0.7) {
            PartyKind::Person
        } else {
            PartyKind::Organization
        };
        parties.push(party(&id, kind, &[Role::Buyer]));
        if rng.gen_bool(0.6) {
            let mut r = rel("R", &id, RelationshipType::SellerTo);
            r.customer_code = Some(format!("K{c}"));
            relationships.push(r);
        }
        customers.push(id);
    }

    let catalog = skus
        .iter()
        .map(|s| CatalogSpec {
            sku: s.clone(),
            unit_price: rng.gen_range(0..=5_000),
            unit_cost: rng.gen_range(0..=3_000),
        })
        .collect();
    let mut inventory = Vec::new();
    for w in &warehouses {
        for s in &skus {
            if rng.gen_bool(0.8) {
                inventory.push(StockSpec {
                    owner: w.id.clone(),
                    sku: s.clone(),
                    qty: rng.gen_range(0..=limits.max_stock),
                });
            }
        }
    }
    if rng.gen_bool(0.2) {
        inventory.push(StockSpec {
            owner: "R".into(),
            sku: skus[0].clone(),
            qty: rng.gen_range(0..=10),
        });
    }

    let n_orders = rng.gen_range(0..=limits.max_orders);
    let horizon = rng.gen_range(1..=150);
    let orders = (0..n_orders)
        .map(|_| OrderSpec {
            time: rng.gen_range(0..horizon),
            buyer: customers[rng.gen_range(0..customers.len())].clone(),
            sku: Some(skus[rng.gen_range(0..skus.len())].clone()),
            qty: Some(rng.gen_range(1..=12)),
            lines: Vec::new(),
        })
        .collect();

    let mut latency = LatencySpec {
        default: rng.gen_range(1..=3),
        ..LatencySpec::default()
    };
    let mut params = ParamsSpec {
        duplicate_po_submits: rng.gen_bool(limits.duplicate_rate),
        ..ParamsSpec::default()
    };
    if rng.gen_bool(0.4) {
        let lo = rng.gen_range(0..=2);
        latency.random_range = Some([lo, lo + rng.gen_range(0..=4)]);
        params.seed = Some(rng.gen());
    }

    ScenarioFile {
        parties,
        locations: Vec::new(),
        relationships,
        agents: AgentsSpec {
            retailer: "R".into(),
            warehouses,
            manufacturers,
            customers,
        },
        catalog,
        inventory,
        orders,
        latency,
        params,
    }
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Every `*.json` file in the scenario corpus, sorted by name.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("scenario corpus exists")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
}

pub mod procurement {
    use std::collections::hash_map::DefaultHasher;
    use std::collections::BTreeMap;
    use std::hash::{Hash, Hasher};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use vcsim_core::party::{PartyKind, Registry, RelationshipType};
    use vcsim_core::procurement::{
        DocumentId, Inspection, PlanId, PlanLine, ProcurementBook, ProcurementError,
        ProcurementState, ReceiptId, WarrantId,
    };
    use vcsim_core::{InventoryLedger, Money, PartyId, SimTime, Sku};

    fn digest(book: &ProcurementBook, ledger: &InventoryLedger) -> u64 {
        let mut h = DefaultHasher::new();
        book.hash(&mut h);
        ledger.hash(&mut h);
        h.finish()
    }

    struct Fixture {
        registry: Registry,
        buyer: PartyId,
        supplier: PartyId,
        stranger: PartyId,
    }

    fn fixture() -> Fixture {
        let mut registry = Registry::new();
        let buyer = registry.register_party(PartyKind::Organization, "Depot", &[]).unwrap();
        let supplier = registry.register_party(PartyKind::Organization, "Maker", &[]).unwrap();
        let stranger = registry.register_party(PartyKind::Organization, "Other", &[]).unwrap();
        registry
            .link_relationship(&supplier, &buyer, RelationshipType::SupplierTo, SimTime(0))
            .unwrap();
        Fixture {
            registry,
            buyer,
            supplier,
            stranger,
        }
    }

    /// Drives one random call sequence against a book and checks it against
    /// a small model of the five-stage chain. Returns how many plans ended
    /// up booked.
    pub fn interleaving(seed: u64, max_calls: usize) -> Result<usize, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fx = fixture();
        let mut book = ProcurementBook::new();
        let mut ledger = InventoryLedger::new(fx.buyer.clone());
        let mut state: BTreeMap<PlanId, ProcurementState> = BTreeMap::new();
        let mut plan_of_doc: BTreeMap<DocumentId, PlanId> = BTreeMap::new();
        let mut passed: BTreeMap<ReceiptId, (PlanId, bool)> = BTreeMap::new();
        let mut plan_of_warrant: BTreeMap<WarrantId, PlanId> = BTreeMap::new();
        let skus: Vec<Sku> = ["A", "B", "C"].iter().map(|s| Sku::new(*s).unwrap()).collect();

        let calls = rng.gen_range(1..=max_calls);
        for t in 0..calls {
            let at = SimTime(t as u64);
            let before = digest(&book, &ledger);
            let pick = |rng: &mut ChaCha8Rng, n: usize| rng.gen_range(1..=n as u64 + 1);
            let (result, expected_state): (Result<(), ProcurementError>, Option<(PlanId, ProcurementState)>) =
                match rng.gen_range(0..6) {
                    0 => {
                        let n = rng.gen_range(0..=3);
                        let lines: Vec<PlanLine> = (0..n)
                            .map(|_| PlanLine {
                                sku: skus[rng.gen_range(0..3)].clone(),
                                quantity: rng.gen_range(0..=20),
                                unit_cost: Money(rng.gen_range(0..=500)),
                            })
                            .collect();
                        match book.create_plan(fx.buyer.clone(), lines, at) {
                            Ok(p) => {
                                state.insert(p.id, ProcurementState::Planned);
                                (Ok(()), None)
                            }
                            Err(e) => (Err(e), None),
                        }
                    }
                    1 => {
                        let plan = PlanId(pick(&mut rng, state.len()));
                        (book.formulate_expenditure(plan).map(|_| ()), None)
                    }
                    2 => {
                        let plan = PlanId(pick(&mut rng, state.len()));
                        let supplier = if rng.gen_bool(0.85) { &fx.supplier } else { &fx.stranger };
                        let r = book.transmit_document(plan, supplier, at, &fx.registry);
                        if let Ok(doc) = &r {
                            plan_of_doc.insert(doc.id, plan);
                        }
                        (r.map(|_| ()), Some((plan, ProcurementState::Planned)))
                    }
                    3 => {
                        let doc = DocumentId(pick(&mut rng, plan_of_doc.len()));
                        let lines = book.document(doc).map(|d| d.lines.clone()).unwrap_or_default();
                        let mut received: Vec<(Sku, u64)> = Vec::new();
                        for l in &lines {
                            if rng.gen_bool(0.8) {
                                received.push((l.sku.clone(), rng.gen_range(1..=l.quantity + 1)));
                            }
                        }
                        let inspection = if rng.gen_bool(0.85) {
                            Inspection::Passed
                        } else {
                            Inspection::Rejected
                        };
                        let r = book.receive_goods(doc, received, inspection, at, &mut ledger);
                        if let Ok(receipt) = &r {
                            passed.insert(receipt.id, (plan_of_doc[&doc], inspection == Inspection::Passed));
                        }
                        let expect = plan_of_doc.get(&doc).map(|p| (*p, ProcurementState::Transmitted));
                        (r.map(|_| ()), expect)
                    }
                    4 => {
                        let receipt = ReceiptId(pick(&mut rng, passed.len()));
                        let r = book.issue_warrant(receipt, &fx.buyer, at);
                        if let Ok(w) = &r {
                            plan_of_warrant.insert(w.id, passed[&receipt].0);
                        }
                        let expect = passed.get(&receipt).map(|(p, _)| (*p, ProcurementState::Received));
                        (r.map(|_| ()), expect)
                    }
                    _ => {
                        let warrant = WarrantId(pick(&mut rng, plan_of_warrant.len()));
                        let r = book.book_ledger(warrant, "INV-1", at);
                        let expect = plan_of_warrant.get(&warrant).map(|p| (*p, ProcurementState::WarrantIssued));
                        (r.map(|_| ()), expect)
                    }
                };
            match &result {
                Err(e) => {
                    if digest(&book, &ledger) != before {
                        return Err(format!("seed {seed} call {t}: failed call {e:?} mutated state"));
                    }
                    if let (ProcurementError::WrongState { actual }, Some((plan, _))) = (e, expected_state) {
                        if state.get(&plan) != Some(actual) {
                            return Err(format!("seed {seed} call {t}: WrongState reports {actual:?}"));
                        }
                    }
                }
                Ok(()) => {
                    if let Some((plan, required)) = expected_state {
                        if state.get(&plan) != Some(&required) {
                            return Err(format!(
                                "seed {seed} call {t}: accepted a call on {plan:?} in {:?}",
                                state.get(&plan)
                            ));
                        }
                        let next = ProcurementState::CHAIN
                            .iter()
                            .position(|s| *s == required)
                            .map(|i| ProcurementState::CHAIN[i + 1])
                            .unwrap();
                        state.insert(plan, next);
                    }
                }
            }
        }

        for plan in book.plan_ids() {
            let trace = book.trace(plan);
            if !ProcurementState::CHAIN.starts_with(&trace) {
                return Err(format!("seed {seed}: plan {plan:?} traced {trace:?}"));
            }
            if book.plan_state(plan) != state.get(&plan).copied() {
                return Err(format!("seed {seed}: plan {plan:?} state disagrees with model"));
            }
        }
        for (receipt, (_, ok)) in &passed {
            let warrants = book.warrants().filter(|w| w.receipt == *receipt).count();
            if warrants > usize::from(*ok) {
                return Err(format!("seed {seed}: receipt {receipt:?} has {warrants} warrants"));
            }
        }
        for entry in book.entries() {
            let plan = plan_of_warrant[&entry.warrant];
            let total = book.expenditure(plan).expect("transmitted plans have one").total;
            let doc = book.document_of_plan(plan).unwrap();
            let receipt = book.receipt_of_document(doc.id).unwrap();
            let received_of = |sku: &Sku| {
                receipt.received.iter().find(|(s, _)| s == sku).map_or(0, |(_, q)| *q)
            };
            let paid: u64 = doc.lines.iter().map(|l| received_of(&l.sku) * l.unit_cost.0).sum();
            let missing: u64 = doc
                .lines
                .iter()
                .map(|l| (l.quantity - received_of(&l.sku)) * l.unit_cost.0)
                .sum();
            if entry.amount.0 != paid || total.0 != paid + missing {
                return Err(format!(
                    "seed {seed}: entry {} against expenditure {} (paid {paid}, missing {missing})",
                    entry.amount, total
                ));
            }
        }
        let entries_per_warrant = book.entries().count();
        if entries_per_warrant > plan_of_warrant.len() {
            return Err(format!("seed {seed}: more ledger entries than warrants"));
        }
        Ok(entries_per_warrant)
    }
}
