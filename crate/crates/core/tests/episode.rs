use std::sync::{Arc, OnceLock};

use arena_core::engine::{ActionResolution, TurnRequest};
use arena_core::memory::{MemoryOp, MemoryResult};
use arena_core::tools::{ExpectedInflow, MonthRange, ProjectionAssumptions, ToolResult};
use arena_core::transcript::{MonthlySnapshot, ToolCallRecord};
use arena_core::{
    replay, Action, EngineError, Episode, EpisodeConfig, Instrument, Money, Next, RecordKind,
    Scenario, ToolCall,
};

fn scenario() -> Arc<Scenario> {
    static S: OnceLock<Arc<Scenario>> = OnceLock::new();
    S.get_or_init(|| Arc::new(Scenario::default_scenario()))
        .clone()
}

fn started(seed: u64) -> Episode {
    let mut e = Episode::new(
        EpisodeConfig::new("default", seed).with_agent("test"),
        scenario(),
    )
    .unwrap();
    e.start().unwrap();
    e
}

fn save(content: &str) -> MemoryOp {
    MemoryOp::SaveNote {
        content: content.into(),
        tags: vec!["plan".into()],
    }
}

#[test]
fn twentieth_call_succeeds_twenty_first_fails() {
    let mut e = started(1);
    for i in 1..=20 {
        assert!(e.call_tool(ToolCall::verify_cash()).is_ok(), "call {i}");
        assert_eq!(e.budget_remaining(), 20 - i);
    }
    assert_eq!(
        e.call_tool(ToolCall::verify_cash()),
        Err(EngineError::BudgetExhausted { limit: 20 })
    );
    assert_eq!(e.state().tool_calls_total, 20);
    // Memory is free and still available.
    for _ in 0..50 {
        assert!(e.memory(save("x")).is_ok());
    }
    assert_eq!(e.state().tool_calls_total, 20);
    // The budget resets next month; the lifetime count does not.
    e.act(Action::pass()).unwrap();
    assert_eq!(e.budget_remaining(), 20);
    e.call_tool(ToolCall::verify_cash()).unwrap();
    assert_eq!(e.state().tool_calls_total, 21);
}

#[test]
fn rejected_calls_are_recorded_but_free() {
    let mut e = started(1);
    let bad = ToolCall::ConductCashflowProjection(ProjectionAssumptions {
        horizon_months: 0,
        monthly_revenue_growth: 0.0,
        monthly_burn: Money::from_units(100),
        monthly_revenue: Money::ZERO,
        expected_inflows: vec![],
    });
    assert!(matches!(
        e.call_tool(bad),
        Err(EngineError::BadAssumptions(_))
    ));
    let future = ToolCall::AnalyzeMarketConditions(MonthRange {
        from_month: None,
        to_month: Some(5),
    });
    assert!(matches!(
        e.call_tool(future),
        Err(EngineError::InvalidRequest(_))
    ));
    assert_eq!(e.budget_remaining(), 20);
    assert_eq!(e.state().tool_calls_total, 0);
    let records: Vec<ToolCallRecord> = e
        .transcript()
        .of_kind(RecordKind::ToolCall)
        .map(|r| r.payload_as().unwrap())
        .collect();
    assert_eq!(records.len(), 2);
    assert!(records
        .iter()
        .all(|r| r.error.is_some() && r.result.is_none()));
}

#[test]
fn memory_recall_by_tag_and_query() {
    let mut e = started(1);
    e.memory(save("raise equity before the downturn")).unwrap();
    e.memory(MemoryOp::SaveNote {
        content: "close monthly".into(),
        tags: vec!["cadence".into()],
    })
    .unwrap();
    let by_tag = e.memory(MemoryOp::RecallNotes {
        query: None,
        tags: Some(vec!["cadence".into()]),
        limit: None,
    });
    let MemoryResult::Notes { notes } = by_tag.unwrap() else {
        panic!("expected notes")
    };
    assert_eq!(notes.len(), 1);
    assert_eq!(notes[0].content, "close monthly");
    let by_query = e.memory(MemoryOp::RecallNotes {
        query: Some("EQUITY".into()),
        tags: None,
        limit: None,
    });
    let MemoryResult::Notes { notes } = by_query.unwrap() else {
        panic!("expected notes")
    };
    assert_eq!(notes.len(), 1);
    assert_eq!(e.observation().recent_notes.len(), 2);
}

#[test]
fn pass_only_dies_with_zero_score() {
    let mut e = started(0);
    let mut next = Next::Continue {
        observation: e.observation(),
    };
    while let Next::Continue { .. } = next {
        next = e.act(Action::pass()).unwrap().next;
    }
    let Next::Terminated { terminal } = next else {
        unreachable!()
    };
    assert!(!terminal.survived);
    assert_eq!(terminal.score, Money::ZERO);
    assert!(terminal.final_cash < Money::ZERO);
    assert_eq!(terminal.months_lived, e.month());
    assert_eq!(e.act(Action::pass()).unwrap_err(), EngineError::EpisodeOver);
    assert_eq!(
        e.call_tool(ToolCall::verify_cash()).unwrap_err(),
        EngineError::EpisodeOver
    );
}

#[test]
fn survivor_score_matches_snapshot_oracle() {
    let horizon = 30;
    let mut e = Episode::new(
        EpisodeConfig::new("default", 4).with_horizon(horizon),
        scenario(),
    )
    .unwrap();
    e.start().unwrap();
    let mut tools = 0;
    while !e.is_over() {
        for _ in 0..(e.month() % 3) {
            e.call_tool(ToolCall::verify_cash()).unwrap();
            tools += 1;
        }
        e.act(Action::pass()).unwrap();
    }
    let terminal = e.terminal().unwrap().clone();
    assert!(terminal.survived);
    assert_eq!(terminal.months_lived, horizon);
    let snaps: Vec<MonthlySnapshot> = e
        .transcript()
        .of_kind(RecordKind::MonthlySnapshot)
        .map(|r| r.payload_as().unwrap())
        .collect();
    assert_eq!(snaps.len(), horizon as usize);
    let ttm: i64 = snaps[snaps.len() - 12..]
        .iter()
        .map(|s| s.revenue.cents())
        .sum();
    let cash = snaps.last().unwrap().cash.cents();
    let oracle = 5 * ttm + cash - 5_000_00 * tools;
    assert_eq!(terminal.score.cents(), oracle);
    assert_eq!(terminal.n_tools, tools as u64);
}

#[test]
fn one_action_per_month() {
    let mut e = started(2);
    assert_eq!(e.expect_month(0, true), Ok(()));
    e.act(Action::pass()).unwrap();
    assert_eq!(e.expect_month(0, true), Err(EngineError::SecondAction));
    assert!(matches!(
        e.expect_month(0, false),
        Err(EngineError::ContractViolation(_))
    ));
    assert!(matches!(
        e.expect_month(2, false),
        Err(EngineError::ContractViolation(_))
    ));
    let two = vec![
        TurnRequest::Action {
            action: Action::pass(),
        },
        TurnRequest::Action {
            action: Action::book_closing(),
        },
    ];
    assert_eq!(e.step_month(two).unwrap_err(), EngineError::SecondAction);
    assert_eq!(e.month(), 1, "a rejected turn changes nothing");
}

#[test]
fn step_month_runs_requests_in_order() {
    let mut e = started(2);
    let turn = vec![
        TurnRequest::Tool {
            call: ToolCall::verify_cash(),
        },
        TurnRequest::Memory {
            op: save("checked"),
        },
        TurnRequest::Action {
            action: Action::book_closing(),
        },
    ];
    let result = e.step_month(turn).unwrap();
    assert_eq!(result.responses.len(), 2);
    assert!(result.responses.iter().all(Result::is_ok));
    assert!(matches!(
        result.outcome.resolution,
        ActionResolution::BookClosing(_)
    ));
    let coerced = e
        .step_month(vec![TurnRequest::Tool {
            call: ToolCall::verify_cash(),
        }])
        .unwrap();
    assert!(coerced.outcome.coerced);
    assert_eq!(coerced.outcome.resolution, ActionResolution::Pass);
}

#[test]
fn tools_never_see_the_future() {
    let mut e = started(9);
    for _ in 0..15 {
        e.act(Action::pass()).unwrap();
    }
    let t = e.month();
    let ToolResult::AnalyzeMarketConditions(view) = e
        .call_tool(ToolCall::AnalyzeMarketConditions(MonthRange::default()))
        .unwrap()
    else {
        panic!("wrong result")
    };
    assert_eq!(view.rows.len() as u32, t + 1);
    assert!(view.rows.iter().all(|r| r.month <= t));
    // Nothing regime-related is exposed anywhere the agent can read.
    let visible = format!(
        "{}{}",
        serde_json::to_string(&e.observation()).unwrap(),
        serde_json::to_string(&view).unwrap()
    );
    for hidden in ["regime", "expansion", "recession", "neutral"] {
        assert!(!visible.contains(hidden), "observation leaks '{hidden}'");
    }
    // Month labels are anonymized.
    let label = e.month_label();
    let year = label.split_whitespace().last().unwrap();
    assert!(!year.chars().all(|c| c.is_ascii_digit()), "label {label}");
}

#[test]
fn records_are_stale_until_closed() {
    let mut e = started(3);
    for _ in 0..4 {
        e.act(Action::pass()).unwrap();
    }
    let records = |e: &mut Episode| match e
        .call_tool(ToolCall::ReviewFinancialRecords(MonthRange::default()))
    {
        Ok(ToolResult::ReviewFinancialRecords(v)) => v,
        other => panic!("unexpected {other:?}"),
    };
    let before = records(&mut e);
    assert!(before.statements.is_none());
    assert!(!before.raw_events.is_empty());
    e.act(Action::book_closing()).unwrap();
    let after = records(&mut e);
    assert_eq!(after.statements.as_ref().map(|s| s.as_of_month), Some(4));
}

#[test]
fn projection_zero_crossing() {
    let mut e = started(0);
    let projection = ToolCall::ConductCashflowProjection(ProjectionAssumptions {
        horizon_months: 24,
        monthly_revenue_growth: 0.0,
        monthly_burn: Money::from_units(1_000_000),
        monthly_revenue: Money::ZERO,
        expected_inflows: vec![ExpectedInflow {
            month: 3,
            amount: Money::from_units(1_000_000),
        }],
    });
    let ToolResult::ConductCashflowProjection(p) = e.call_tool(projection).unwrap() else {
        panic!()
    };
    // Cash after month k is c0 - k*1M + 1M once k >= 3.
    let c0 = e.state().cash;
    let oracle = (1..=24).find(|&k| {
        c0 - Money::from_units(1_000_000 * k) + Money::from_units(1_000_000) <= Money::ZERO
    });
    assert_eq!(p.zero_crossing_month, oracle.map(|k| k as u32));
    assert_eq!(p.rows.len(), 24);
}

#[test]
fn raise_settles_after_delay_and_shows_in_feedback() {
    let mut e = started(12);
    let outcome = loop {
        let o = e
            .act(Action::raise(
                Instrument::Equity,
                Money::from_units(4_000_000),
            ))
            .unwrap();
        if let ActionResolution::FundRaisingRequest(f) = &o.resolution {
            if f.success {
                break f.clone();
            }
        }
    };
    let due = outcome.settlement_month.unwrap();
    while e.month() < due {
        e.act(Action::pass()).unwrap();
    }
    let feedback = e
        .transcript()
        .of_kind(RecordKind::EnvFeedback)
        .find(|r| r.t == due)
        .expect("settlement feedback");
    assert!(serde_json::to_string(&feedback.payload)
        .unwrap()
        .contains("equity"));
}

#[test]
fn transcripts_replay_and_detect_tampering() {
    let mut e = started(8);
    while !e.is_over() && e.month() < 40 {
        e.call_tool(ToolCall::verify_cash()).unwrap();
        e.memory(save("tick")).unwrap();
        let action = match e.month() % 5 {
            0 => Action::book_closing(),
            3 => Action::raise(Instrument::Debt, Money::from_units(2_000_000)),
            _ => Action::pass(),
        };
        e.act(action).unwrap();
    }
    let jsonl = e.transcript().to_jsonl();
    let again = replay(&jsonl, scenario()).unwrap();
    assert_eq!(again.to_jsonl(), jsonl);

    let tampered = jsonl.replacen("\"book_closing\"", "\"pass\"", 1);
    assert!(matches!(
        replay(&tampered, scenario()),
        Err(EngineError::ReplayMismatch(_))
    ));
}

#[test]
fn same_inputs_same_bytes() {
    let run = || {
        let mut e = started(77);
        let mut i = 0u32;
        while !e.is_over() {
            let action = match i % 7 {
                0 => Action::book_closing(),
                4 => Action::raise(Instrument::Equity, Money::from_units(3_000_000)),
                _ => Action::pass(),
            };
            e.act(action).unwrap();
            i += 1;
        }
        e.transcript().to_jsonl()
    };
    assert_eq!(run(), run());
}

#[test]
fn unknown_scenario_and_bad_horizon() {
    let err = Episode::new(EpisodeConfig::new("missing", 0), scenario()).unwrap_err();
    assert!(matches!(err, EngineError::ScenarioNotFound(_)));
    let err = Episode::new(
        EpisodeConfig::new("default", 0).with_horizon(500),
        scenario(),
    )
    .unwrap_err();
    assert!(matches!(err, EngineError::InvalidRequest(_)));
    let mut e = Episode::new(EpisodeConfig::new("default", 0), scenario()).unwrap();
    assert_eq!(e.act(Action::pass()).unwrap_err(), EngineError::NotStarted);
}
