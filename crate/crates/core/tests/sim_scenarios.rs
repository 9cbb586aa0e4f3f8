//! End-to-end scenario runs: convergence, determinism, channel corruption,
//! codec recovery, and the secrecy audits.

use keyfold_core::channel::{ChannelModel, FlipProbability};
use keyfold_core::keytree::{compute_public, Derivation, KeyTree, KeyTreeError, MemberId, NodeId};
use keyfold_core::ldpc::ParityCheckMatrix;
use keyfold_core::modmath::{GroupParams, KeyMode, Natural};
use keyfold_core::sim::{
    audit_secrecy, member_handle, run_scenario, ChannelConfig, CodecConfig, MemberState, Message,
    SimConfig, SimEvent,
};

fn params64() -> GroupParams {
    GroupParams::new(
        Natural::from(18446744073709551557u64),
        Natural::from(5u32),
    )
    .unwrap()
}

fn base_config() -> SimConfig {
    SimConfig {
        params: params64(),
        derivation: Derivation::Totient,
        key_mode: KeyMode::Prime,
        seed: 42,
        initial_members: vec![],
        events: vec![],
        channel: ChannelConfig::Lossless,
        codec: CodecConfig::Off,
    }
}

/// Seven members arranged so a join lands under node 5 and rekeys the
/// chain 5, 2, 0.
fn seven_member_layout() -> Vec<(MemberId, Option<usize>)> {
    vec![
        ("m1".into(), Some(7)),
        ("m2".into(), Some(8)),
        ("m3".into(), Some(9)),
        ("m4".into(), Some(10)),
        ("m7".into(), Some(5)),
        ("m5".into(), Some(13)),
        ("m6".into(), Some(14)),
    ]
}

fn codec_on() -> CodecConfig {
    CodecConfig::On {
        matrix: ParityCheckMatrix::builtin_8x16(),
        max_bit_degree: 3,
    }
}

#[test]
fn seven_members_plus_join_converge_on_lossless_channel() {
    let mut config = base_config();
    config.initial_members = seven_member_layout();
    config.events = vec![SimEvent::Join("m8".into())];
    let report = run_scenario(&config).unwrap();

    assert!(report.all_converged());
    assert!(!report.any_failures());
    let join = &report.events[1];
    assert_eq!(join.kind, "join");
    assert_eq!(join.updated_nodes, vec![5, 2, 0]);
    assert_eq!(join.broadcast_nodes, vec![5, 2]);
    assert_eq!(join.converged, 8);
    assert_eq!(join.members, 8);
}

#[test]
fn empty_event_list_reports_initial_convergence_only() {
    let mut config = base_config();
    config.initial_members = vec![("a".into(), None), ("b".into(), None), ("c".into(), None)];
    let report = run_scenario(&config).unwrap();
    assert_eq!(report.events.len(), 1);
    assert_eq!(report.events[0].kind, "init");
    assert_eq!(report.events[0].converged, 3);
    assert!(report.all_converged());
}

fn random_event_mix(member_count: usize, events: usize, seed: u64) -> SimConfig {
    let mut config = base_config();
    config.seed = seed;
    config.initial_members = (0..member_count)
        .map(|i| (format!("m{i}"), None))
        .collect();
    // A deterministic join/leave mix that never empties the group.
    let mut current: Vec<String> = config
        .initial_members
        .iter()
        .map(|(id, _)| id.clone())
        .collect();
    let mut next_id = member_count;
    let mut stream = seed;
    for _ in 0..events {
        stream = stream.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let coin = (stream >> 33) % 2 == 0;
        if coin && current.len() > 2 {
            let victim = (stream >> 17) as usize % current.len();
            config
                .events
                .push(SimEvent::Leave(current.remove(victim)));
        } else {
            let id = format!("m{next_id}");
            next_id += 1;
            current.push(id.clone());
            config.events.push(SimEvent::Join(id));
        }
    }
    config
}

#[test]
fn thirty_random_events_with_clean_channel_and_codec() {
    let mut config = random_event_mix(16, 30, 7);
    config.channel = ChannelConfig::Model(ChannelModel::Bsc {
        flip_probability: FlipProbability::ZERO,
        seed: 1,
    });
    config.codec = codec_on();
    let report = run_scenario(&config).unwrap();
    assert!(report.all_converged(), "{}", report.render_text());
    assert!(!report.any_failures());
    // The codec ran (trials were counted) but never needed a correction.
    assert!(report.total_decode_trials() > 0);
    assert_eq!(report.total_correction_trials(), 0);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let mut config = random_event_mix(8, 12, 99);
    config.channel = ChannelConfig::Model(ChannelModel::Bsc {
        flip_probability: FlipProbability::parse_decimal("0.01").unwrap(),
        seed: 5,
    });
    config.codec = codec_on();
    let a = run_scenario(&config).unwrap();
    let b = run_scenario(&config).unwrap();
    assert_eq!(a.render_text(), b.render_text());
    assert_eq!(a.render_csv(), b.render_csv());
}

#[test]
fn single_flip_per_block_is_always_corrected() {
    // Wire position 4 of every block arrives inverted.
    let mut config = random_event_mix(16, 10, 3);
    config.channel = ChannelConfig::Model(ChannelModel::Explicit { positions: vec![4] });
    config.codec = codec_on();
    let report = run_scenario(&config).unwrap();
    assert!(report.all_converged(), "{}", report.render_text());
    assert!(!report.any_failures());
    assert!(report.total_correction_trials() > 0);
}

#[test]
fn uncoded_noisy_channel_loses_deliveries() {
    let mut config = random_event_mix(16, 10, 3);
    config.channel = ChannelConfig::Model(ChannelModel::Bsc {
        flip_probability: FlipProbability::parse_decimal("0.2").unwrap(),
        seed: 11,
    });
    config.codec = CodecConfig::Off;
    let report = run_scenario(&config).unwrap();
    assert!(report.any_failures(), "{}", report.render_text());
    assert!(!report.all_converged());
}

#[test]
fn audits_pass_for_joins_and_leaves() {
    let mut config = base_config();
    config.initial_members = (0..6).map(|i| (format!("m{i}"), None)).collect();
    config.events = vec![
        SimEvent::Join("x".into()),
        SimEvent::Leave("m2".into()),
        SimEvent::Leave("x".into()),
        SimEvent::Join("y".into()),
    ];
    let report = run_scenario(&config).unwrap();
    assert!(report.all_converged());
    let audit = audit_secrecy(&report);
    assert_eq!(audit.join_cases, 2);
    assert_eq!(audit.leave_cases, 2);
    assert!(audit.passed(), "{:?}", audit.violations);
}

#[test]
fn audit_is_vacuous_without_membership_changes() {
    let mut config = base_config();
    config.initial_members = vec![("a".into(), None), ("b".into(), None)];
    let report = run_scenario(&config).unwrap();
    let audit = audit_secrecy(&report);
    assert_eq!(audit.join_cases + audit.leave_cases, 0);
    assert!(audit.passed());
}

#[test]
fn config_validation_rejects_bad_event_sequences() {
    let mut config = base_config();
    config.initial_members = vec![("a".into(), None)];
    config.events = vec![SimEvent::Leave("a".into())];
    assert!(run_scenario(&config).is_err());

    let mut config = base_config();
    config.initial_members = vec![("a".into(), None), ("a".into(), None)];
    assert!(run_scenario(&config).is_err());

    let mut config = base_config();
    config.initial_members = vec![("a".into(), None), ("b".into(), Some(2))];
    assert!(run_scenario(&config).is_err());

    let mut config = base_config();
    config.initial_members = vec![("a".into(), None)];
    config.events = vec![SimEvent::Join("a".into())];
    assert!(run_scenario(&config).is_err());
}

/// The member-side message handling the spec walks through: merging only
/// the broadcast keys a member actually needs.
#[test]
fn member_folds_from_exactly_the_broadcast_it_needs() {
    let params = GroupParams::new(Natural::from(23u32), Natural::from(5u32)).unwrap();
    let layout: Vec<(MemberId, NodeId, Natural)> = [
        ("m1", 7usize, 2u64),
        ("m2", 8, 3),
        ("m3", 9, 5),
        ("m4", 10, 7),
        ("m7", 5, 17),
        ("m5", 13, 11),
        ("m6", 14, 13),
    ]
    .iter()
    .map(|(id, at, s)| ((*id).into(), NodeId(*at), Natural::from(*s)))
    .collect();
    let tree = KeyTree::from_layout(params.clone(), Derivation::Totient, &layout).unwrap();

    let mut m1 = MemberState::new("m1".into(), Natural::from(2u64), &tree).unwrap();
    let mut m5 = MemberState::new("m5".into(), Natural::from(11u64), &tree).unwrap();
    let old_key = m1.current_group_key.clone().unwrap();

    // m8 joins under node 5; the support rekeys 5, 2, 0 and broadcasts
    // the publics of 5 and 2.
    let joiner_public = compute_public(&params, &Natural::from(19u64), Derivation::Totient).unwrap();
    let (after, rekey) = tree.join("m8".into(), joiner_public.clone()).unwrap();
    let truth = after.group_key().unwrap().clone();

    let request = Message::join_request("m8".into(), NodeId(12), joiner_public);
    member_handle(&mut m1, &request).unwrap();
    member_handle(&mut m5, &request).unwrap();
    // The chain above the insertion is stale now; neither member can fold.
    assert_eq!(m1.current_group_key, None);
    assert_eq!(m5.current_group_key, None);

    // m1 sits in the left subtree: the public of node 2 is all it needs.
    let pk2 = rekey.broadcast_publics[1].clone();
    assert_eq!(pk2.0, NodeId(2));
    member_handle(&mut m1, &Message::rekey("m7".into(), vec![pk2])).unwrap();
    assert_eq!(m1.current_group_key.as_ref(), Some(&truth));
    assert_ne!(m1.current_group_key.as_ref(), Some(&old_key));

    // m5 sits under node 6: the public of node 5 is all it needs.
    let pk5 = rekey.broadcast_publics[0].clone();
    assert_eq!(pk5.0, NodeId(5));
    member_handle(&mut m5, &Message::rekey("m7".into(), vec![pk5.clone()])).unwrap();
    assert_eq!(m5.current_group_key.as_ref(), Some(&truth));

    // A broadcast not touching m1's path leaves everything but the cached
    // public unchanged.
    let before = m1.current_group_key.clone();
    member_handle(&mut m1, &Message::rekey("m7".into(), vec![pk5])).unwrap();
    assert_eq!(m1.current_group_key, before);

    // A broadcast naming a node outside the view is a stale-view error.
    let err = member_handle(
        &mut m1,
        &Message::rekey("m7".into(), vec![(NodeId(400), Natural::from(9u32))]),
    )
    .unwrap_err();
    assert!(matches!(err, KeyTreeError::StaleView { node: NodeId(400) }));
}
