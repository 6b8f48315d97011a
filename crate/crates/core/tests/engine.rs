mod common;

use std::collections::BTreeMap;

use common::{fuzz_scenario, FuzzLimits};
use vcsim_core::engine::{run, AgentRole, LatencyTable};
use vcsim_core::party::Registry;
use vcsim_core::protocol::Message;
use vcsim_core::scenario::{check_run, parse_scenario, Scenario};
use vcsim_core::{Envelope, LogEntry, PartyId, SimError, SimTime, Simulation, StepOutcome, World};

fn p(s: &str) -> PartyId {
    PartyId::new(s).unwrap()
}

fn empty_world() -> World {
    World {
        registry: Registry::new(),
        retailer: p("R"),
        agents: BTreeMap::new(),
    }
}

fn note_env(at: u64, seq: u64) -> Envelope {
    Envelope {
        deliver_at: SimTime(at),
        seq,
        from: p("C"),
        to: p("R"),
        payload: Message::ShipmentNotice {
            order_id: "O1".into(),
        },
    }
}

fn two_warehouse_scenario() -> Scenario {
    let text = r#"{
      "parties": [
        {"id": "R", "kind": "Organization", "name": "RetailCo"},
        {"id": "W1", "kind": "Organization", "name": "North"},
        {"id": "W2", "kind": "Organization", "name": "South"},
        {"id": "M1", "kind": "Organization", "name": "Maker"},
        {"id": "C1", "kind": "Person", "name": "Ann"}
      ],
      "relationships": [
        {"from": "M1", "to": "W1", "type": "SupplierTo"},
        {"from": "M1", "to": "W2", "type": "SupplierTo"}
      ],
      "agents": {
        "retailer": "R",
        "warehouses": [
          {"id": "W1", "manufacturer": "M1", "reorder_qty": 20},
          {"id": "W2", "manufacturer": "M1", "reorder_qty": 20}
        ],
        "manufacturers": [{"id": "M1", "production_delay": 3}],
        "customers": ["C1"]
      },
      "catalog": [{"sku": "A", "unit_price": 250, "unit_cost": 100}],
      "inventory": [
        {"owner": "W1", "sku": "A", "qty": 10},
        {"owner": "W2", "sku": "A", "qty": 10}
      ],
      "orders": [{"time": 0, "buyer": "C1", "sku": "A", "qty": 4}]
    }"#;
    parse_scenario(text).unwrap()
}

#[test]
fn schedule_rejects_the_past() {
    let mut sim = Simulation::empty(empty_world(), LatencyTable::constant(1), 10);
    sim.schedule(note_env(3, 0)).unwrap();
    // Deliver the t=3 envelope to move the clock; R is not an agent here.
    assert!(matches!(sim.step(), Err(SimError::UnknownRecipient(_))));
    assert_eq!(sim.clock(), SimTime(3));
    sim.schedule(note_env(5, 1)).unwrap();
    assert!(matches!(
        sim.schedule(note_env(2, 2)),
        Err(SimError::SchedulesInPast { .. })
    ));
}

#[test]
fn empty_queue_is_quiescent() {
    let mut sim = Simulation::empty(empty_world(), LatencyTable::constant(1), 10);
    assert_eq!(sim.step().unwrap(), StepOutcome::Quiescent);
}

#[test]
fn same_time_dequeues_in_seq_order() {
    let scenario = two_warehouse_scenario();
    let world = World::from_scenario(&scenario);
    let mut sim = Simulation::empty(world, LatencyTable::constant(1), 100);
    for seq in [7, 3, 5] {
        let env = Envelope {
            deliver_at: SimTime(2),
            seq,
            from: p("W1"),
            to: p("C1"),
            payload: Message::ShipmentNotice {
                order_id: format!("O{seq}").as_str().into(),
            },
        };
        sim.schedule(env).unwrap();
    }
    let mut seen = Vec::new();
    while let StepOutcome::Delivered(env) = sim.step().unwrap() {
        seen.push(env.seq);
    }
    assert_eq!(seen, vec![3, 5, 7]);
}

#[test]
fn handler_output_grows_queue_and_log() {
    let scenario = two_warehouse_scenario();
    let mut sim = Simulation::new(&scenario);
    assert_eq!(sim.queue_len(), 1);
    let before = sim.log().entries().len();
    // The order fans out to both warehouses.
    sim.step().unwrap();
    assert_eq!(sim.queue_len(), 2);
    let added: Vec<_> = sim.log().entries()[before..]
        .iter()
        .filter(|e| matches!(e, LogEntry::Message(_)))
        .collect();
    assert_eq!(added.len(), 1);
}

#[test]
fn zero_orders_is_setup_only() {
    let text = std::fs::read_to_string(common::corpus_dir().join("no_orders.json")).unwrap();
    let out = run(&parse_scenario(&text).unwrap()).unwrap();
    let entries = out.log.entries();
    assert!(entries[..entries.len() - 1]
        .iter()
        .all(|e| matches!(e, LogEntry::Note { .. } | LogEntry::Inventory(_))));
    assert_eq!(
        entries.last(),
        Some(&LogEntry::End {
            final_time: SimTime::ZERO,
            event_count: 0
        })
    );
}

#[test]
fn happy_path_has_one_confirm_shipment_and_payment() {
    let out = run(&two_warehouse_scenario()).unwrap();
    let count = |variant: &str| out.log.messages().filter(|e| e.payload.variant() == variant).count();
    assert_eq!(count("ShipConfirm"), 1);
    assert_eq!(count("GoodsShipped"), 1);
    assert_eq!(count("Payment"), 1);
    assert_eq!(count("ShipGoodsRequest"), 2);
    assert_eq!(count("CancelReservation"), 1);
    assert!(check_run(&out).is_empty());
}

#[test]
fn runs_are_byte_identical() {
    let scenario = two_warehouse_scenario();
    assert_eq!(run(&scenario).unwrap().log.render(), run(&scenario).unwrap().log.render());
}

#[test]
fn livelock_budget() {
    let mut scenario = two_warehouse_scenario();
    scenario.params.max_events = 3;
    assert!(matches!(run(&scenario), Err(SimError::EventBudgetExceeded(3))));
}

#[test]
fn role_latency_applies() {
    let mut scenario = two_warehouse_scenario();
    scenario.latency.pairs.push(vcsim_core::scenario::RoleLatency {
        from: AgentRole::Retailer,
        to: AgentRole::Warehouse,
        ticks: 5,
    });
    let out = run(&scenario).unwrap();
    let request = out
        .log
        .messages()
        .find(|e| e.payload.variant() == "ShipGoodsRequest")
        .unwrap();
    assert_eq!(request.deliver_at, SimTime(5));
}

#[test]
fn fuzzed_logs_keep_the_clock_monotone_and_causal() {
    let limits = FuzzLimits {
        max_orders: 60,
        ..FuzzLimits::default()
    };
    for seed in 0..60 {
        let file = fuzz_scenario(seed, &limits);
        let scenario = Scenario::from_file(&file).unwrap();
        let out = run(&scenario).unwrap();
        let mut last = SimTime::ZERO;
        let mut last_key = None;
        for e in out.log.entries() {
            let at = match e {
                LogEntry::Message(env) => {
                    let key = (env.deliver_at, env.seq);
                    assert!(last_key < Some(key), "seed {seed}: out of order at {key:?}");
                    last_key = Some(key);
                    env.deliver_at
                }
                LogEntry::Inventory(row) => row.at,
                LogEntry::Note { at, .. } => *at,
                LogEntry::End { final_time, .. } => *final_time,
            };
            assert!(at >= last, "seed {seed}: clock went back");
            last = at;
        }
        let violations = check_run(&out);
        assert!(violations.is_empty(), "seed {seed}: {violations:?}");
    }
}
