//! Round-based deterministic simulation of a member group exchanging
//! join/leave/rekey broadcasts over a lossy channel.
//!
//! Every member holds a partial view of the key tree (shape, occupants and
//! public keys, plus its own leaf secret). Structural notices (join
//! requests, leave notices) are control traffic and delivered reliably;
//! rekey broadcasts are serialized to bits, optionally encoded block by
//! block, pushed through the channel model once per receiving member, and
//! decoded on arrival. A member whose delivery fails is left stale for the
//! event and counted against convergence.
//!
//! Runs are fully deterministic: every random draw comes from streams
//! derived from the scenario seed, members iterate in id order, and each
//! transmission derives its channel stream as `seed XOR transmission index`.

pub mod payload;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::channel::{transmit_bits, ChannelError, ChannelModel};
use crate::keytree::{
    compute_node_secret, compute_public, Derivation, KeyTree, KeyTreeError, MemberId, NodeId,
};
use crate::ldpc::{build_stopping_set, Codeword, EncodingStoppingSet, LdpcError, ParityCheckMatrix, TannerGraph};
use crate::modmath::{gen_secret_key, natural_to_decimal, GroupParams, KeyMode, Natural};
use crate::rng::{SplitMix64, ALGORITHM_ID};

pub use payload::PayloadError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    Config(String),
    Tree(KeyTreeError),
    Ldpc(LdpcError),
    Channel(ChannelError),
    Payload(PayloadError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(why) => write!(f, "bad scenario: {why}"),
            SimError::Tree(e) => write!(f, "{e}"),
            SimError::Ldpc(e) => write!(f, "{e}"),
            SimError::Channel(e) => write!(f, "{e}"),
            SimError::Payload(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<KeyTreeError> for SimError {
    fn from(e: KeyTreeError) -> Self {
        SimError::Tree(e)
    }
}

impl From<LdpcError> for SimError {
    fn from(e: LdpcError) -> Self {
        SimError::Ldpc(e)
    }
}

impl From<ChannelError> for SimError {
    fn from(e: ChannelError) -> Self {
        SimError::Channel(e)
    }
}

/// A membership event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    Join(MemberId),
    Leave(MemberId),
}

/// Channel applied to rekey broadcasts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelConfig {
    /// Deliver bits unharmed.
    Lossless,
    Model(ChannelModel),
}

/// Error-correction layer applied to rekey broadcasts.
#[derive(Debug, Clone)]
pub enum CodecConfig {
    Off,
    /// Encode each block with the schedule built from this matrix.
    On {
        matrix: ParityCheckMatrix,
        max_bit_degree: usize,
    },
}

/// A full scenario description. See the CLI crate for the on-disk format.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: GroupParams,
    pub derivation: Derivation,
    pub key_mode: KeyMode,
    pub seed: u64,
    /// Initial members, optionally with explicit leaf positions (all or
    /// none must carry one).
    pub initial_members: Vec<(MemberId, Option<usize>)>,
    pub events: Vec<SimEvent>,
    pub channel: ChannelConfig,
    pub codec: CodecConfig,
}

/// Message kinds exchanged in the simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageKind {
    JoinRequest,
    LeaveNotice,
    RekeyBroadcast,
}

/// A broadcast message: control notices carry their structural meaning,
/// rekey broadcasts carry `(node, public key)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: MemberId,
    pub payload: Vec<(NodeId, Natural)>,
}

impl Message {
    /// A join request carries exactly the joiner's public key, tagged with
    /// the leaf it will occupy.
    pub fn join_request(sender: MemberId, leaf: NodeId, public: Natural) -> Self {
        Message {
            kind: MessageKind::JoinRequest,
            sender,
            payload: alloc::vec![(leaf, public)],
        }
    }

    pub fn leave_notice(sender: MemberId) -> Self {
        Message {
            kind: MessageKind::LeaveNotice,
            sender,
            payload: Vec::new(),
        }
    }

    pub fn rekey(sender: MemberId, payload: Vec<(NodeId, Natural)>) -> Self {
        Message {
            kind: MessageKind::RekeyBroadcast,
            sender,
            payload,
        }
    }
}

/// One member's protocol state: its leaf, its secret, its partial view of
/// the tree, and the key material from its last successful fold.
#[derive(Debug, Clone)]
pub struct MemberState {
    pub id: MemberId,
    pub leaf: NodeId,
    pub secret: Natural,
    pub view: KeyTree,
    pub current_group_key: Option<Natural>,
    /// Secrets along the member's key path, leaf to root, from the last
    /// successful fold.
    pub known_secrets: Vec<(NodeId, Natural)>,
}

impl MemberState {
    /// Bootstraps a member from a snapshot of the tree: a stripped public
    /// view plus the member's own secret, then an initial fold.
    pub fn new(id: MemberId, secret: Natural, full_tree: &KeyTree) -> Result<Self, KeyTreeError> {
        let leaf = full_tree.member_leaf(&id).ok_or(KeyTreeError::NotAMember)?;
        let mut view = full_tree.public_view();
        view.install_secret(leaf, secret.clone())?;
        let mut state = MemberState {
            id,
            leaf,
            secret,
            view,
            current_group_key: None,
            known_secrets: Vec::new(),
        };
        state.refold();
        Ok(state)
    }

    /// Folds the key path from scratch; on failure the member is left
    /// without a current group key.
    fn refold(&mut self) {
        match fold_with_path(&self.view, self.leaf) {
            Ok((key, path)) => {
                self.current_group_key = Some(key);
                self.known_secrets = path;
            }
            Err(_) => {
                self.current_group_key = None;
                self.known_secrets = Vec::new();
            }
        }
    }

    /// True when a broadcast touches this member's key path or the sibling
    /// keys its fold consumes.
    fn is_affected_by(&self, payload: &[(NodeId, Natural)]) -> bool {
        let Ok(path) = self.view.key_path(self.leaf) else {
            return true;
        };
        payload.iter().any(|(node, _)| {
            path.contains(node) || path.iter().any(|p| p.sibling() == Some(*node))
        })
    }
}

/// Applies one received message to a member's state.
///
/// Join requests and leave notices replay the deterministic structural
/// transformation on the member's view; rekey broadcasts merge the carried
/// public keys and refold the group key when the member's path is affected.
/// A payload naming a node the view does not have is a
/// [`KeyTreeError::StaleView`].
pub fn member_handle(state: &mut MemberState, msg: &Message) -> Result<(), KeyTreeError> {
    match msg.kind {
        MessageKind::JoinRequest => {
            let (expected_leaf, public) = match msg.payload.as_slice() {
                [(leaf, public)] => (*leaf, public.clone()),
                _ => {
                    return Err(KeyTreeError::InvalidLayout(
                        "join request must carry exactly one public key",
                    ))
                }
            };
            let inserted = state.view.splice_in(&msg.sender, public, None)?;
            if inserted.right() != expected_leaf {
                return Err(KeyTreeError::StaleView {
                    node: expected_leaf,
                });
            }
            state.leaf = state
                .view
                .member_leaf(&state.id)
                .ok_or(KeyTreeError::NotAMember)?;
            state.refold();
            Ok(())
        }
        MessageKind::LeaveNotice => {
            state.view.splice_out(&msg.sender)?;
            state.leaf = state
                .view
                .member_leaf(&state.id)
                .ok_or(KeyTreeError::NotAMember)?;
            state.refold();
            Ok(())
        }
        MessageKind::RekeyBroadcast => {
            let affected =
                state.is_affected_by(&msg.payload) || state.current_group_key.is_none();
            for (node, public) in &msg.payload {
                state.view.merge_public(*node, public.clone())?;
            }
            if affected {
                state.refold();
            }
            Ok(())
        }
    }
}

/// Folds from `leaf` to the root using the view's publics, returning the
/// group key and every node secret along the path.
fn fold_with_path(
    view: &KeyTree,
    leaf: NodeId,
) -> Result<(Natural, Vec<(NodeId, Natural)>), KeyTreeError> {
    let mut own = view
        .node(leaf)
        .and_then(|n| n.secret.clone())
        .ok_or(KeyTreeError::MissingSecret { node: leaf })?;
    let mut path = alloc::vec![(leaf, own.clone())];
    let mut v = leaf;
    while let Some(parent) = v.parent() {
        let sibling = v.sibling().expect("non-root has sibling");
        let sibling_public = view
            .node(sibling)
            .and_then(|n| n.public.clone())
            .ok_or(KeyTreeError::InsufficientInformation { node: sibling })?;
        own = compute_node_secret(view.params(), &own, &sibling_public, view.derivation())?;
        path.push((parent, own.clone()));
        v = parent;
    }
    Ok((own, path))
}

/// Per-event outcome row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub index: usize,
    /// "init", "join" or "leave".
    pub kind: String,
    pub member: MemberId,
    pub updated_nodes: Vec<usize>,
    pub broadcast_nodes: Vec<usize>,
    /// Decimal group key after the event (the simulator is omniscient).
    pub group_key: String,
    pub converged: usize,
    pub members: usize,
    pub decode_trials: u64,
    /// Decode trials beyond the first per block: zero on a clean channel.
    pub correction_trials: u64,
    /// `member:reason` entries for every delivery problem.
    pub failures: Vec<String>,
}

/// Snapshot taken at a leave event for the forward-secrecy audit.
#[derive(Debug, Clone)]
pub struct LeaveAudit {
    pub event_index: usize,
    pub member: MemberId,
    /// Every node secret the departed member held, at pre-leave positions.
    pub knowledge: Vec<(NodeId, Natural)>,
    /// Public view after the event, broadcasts included.
    pub post_view: KeyTree,
    pub new_group_key: Natural,
}

/// Snapshot taken at a join event for the backward-secrecy audit.
#[derive(Debug, Clone)]
pub struct JoinAudit {
    pub event_index: usize,
    pub member: MemberId,
    /// Every node secret the joiner holds right after joining.
    pub knowledge: Vec<(NodeId, Natural)>,
    /// Public view as it was before the join.
    pub pre_view: KeyTree,
    /// All group keys that were ever current before the join.
    pub prior_group_keys: Vec<Natural>,
}

#[derive(Debug, Clone, Default)]
pub struct AuditTrail {
    pub joins: Vec<JoinAudit>,
    pub leaves: Vec<LeaveAudit>,
}

/// Everything a scenario run produces. Rendering is deterministic; two runs
/// of the same config produce byte-identical text and CSV.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub seed: u64,
    pub channel_algorithm: &'static str,
    pub channel_desc: String,
    pub codec_desc: String,
    pub events: Vec<EventRecord>,
    pub audit: AuditTrail,
}

impl SimReport {
    pub fn all_converged(&self) -> bool {
        self.events.iter().all(|e| e.converged == e.members)
    }

    pub fn any_failures(&self) -> bool {
        self.events.iter().any(|e| !e.failures.is_empty())
    }

    pub fn total_decode_trials(&self) -> u64 {
        self.events.iter().map(|e| e.decode_trials).sum()
    }

    pub fn total_correction_trials(&self) -> u64 {
        self.events.iter().map(|e| e.correction_trials).sum()
    }

    /// Structured text rendering, one block per event.
    pub fn render_text(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "scenario seed={}", self.seed);
        let _ = writeln!(out, "channel algorithm={} {}", self.channel_algorithm, self.channel_desc);
        let _ = writeln!(out, "codec {}", self.codec_desc);
        for e in &self.events {
            let _ = writeln!(
                out,
                "event {} kind={} member={} updated={:?} broadcast={:?} group_key={} converged={}/{} decode_trials={} correction_trials={} failures={:?}",
                e.index,
                e.kind,
                if e.member.is_empty() { "-" } else { &e.member },
                e.updated_nodes,
                e.broadcast_nodes,
                e.group_key,
                e.converged,
                e.members,
                e.decode_trials,
                e.correction_trials,
                e.failures,
            );
        }
        let _ = writeln!(
            out,
            "result converged={} failures={}",
            self.all_converged(),
            self.any_failures()
        );
        out
    }

    /// CSV rendering: event index, kind, member, converged count, member
    /// count, decode trials, correction trials, failure count.
    pub fn render_csv(&self) -> String {
        use core::fmt::Write;
        let mut out = String::from(
            "event,kind,member,converged,members,decode_trials,correction_trials,failures\n",
        );
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.index,
                e.kind,
                e.member,
                e.converged,
                e.members,
                e.decode_trials,
                e.correction_trials,
                e.failures.len()
            );
        }
        out
    }
}

/// Outcome of replaying the audit snapshots against the secrecy goals.
#[derive(Debug, Clone, Default)]
pub struct AuditResult {
    pub join_cases: usize,
    pub leave_cases: usize,
    /// Human-readable descriptions of any derivation that succeeded when it
    /// must not have.
    pub violations: Vec<String>,
}

impl AuditResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays every membership change against its secrecy goal: a departed
/// member's cached secrets must not derive any later group key, and a
/// joiner's secrets must not derive any earlier one. Violations are
/// reported, not panicked.
pub fn audit_secrecy(report: &SimReport) -> AuditResult {
    let mut result = AuditResult::default();
    for case in &report.audit.leaves {
        result.leave_cases += 1;
        for derived in derivable_keys(&case.knowledge, &case.post_view) {
            if derived == case.new_group_key {
                result.violations.push(format!(
                    "event {}: departed member {} derived the new group key",
                    case.event_index, case.member
                ));
            }
        }
    }
    for case in &report.audit.joins {
        result.join_cases += 1;
        for derived in derivable_keys(&case.knowledge, &case.pre_view) {
            if case.prior_group_keys.contains(&derived) {
                result.violations.push(format!(
                    "event {}: joiner {} derived a pre-join group key",
                    case.event_index, case.member
                ));
            }
        }
    }
    result
}

/// Everything an attacker can reach by planting each known secret at each
/// position of a view and folding upward with the view's public keys.
fn derivable_keys(knowledge: &[(NodeId, Natural)], view: &KeyTree) -> Vec<Natural> {
    let mut keys = Vec::new();
    let positions: Vec<NodeId> = view.occupied_leaves();
    let mut internal: Vec<NodeId> = Vec::new();
    for leaf in &positions {
        let mut v = *leaf;
        while let Some(p) = v.parent() {
            if !internal.contains(&p) {
                internal.push(p);
            }
            v = p;
        }
    }
    let mut all = positions;
    all.extend(internal);
    for (_, secret) in knowledge {
        for start in &all {
            if let Some(key) = fold_attempt(view, *start, secret) {
                keys.push(key);
            }
        }
    }
    keys
}

fn fold_attempt(view: &KeyTree, start: NodeId, secret: &Natural) -> Option<Natural> {
    let mut own = secret.clone();
    let mut v = start;
    while let Some(parent) = v.parent() {
        let sibling_public = view.node(v.sibling()?)?.public.clone()?;
        own = compute_node_secret(view.params(), &own, &sibling_public, view.derivation()).ok()?;
        v = parent;
    }
    Some(own)
}

/// Runs a scenario to completion. Deterministic for a fixed config.
pub fn run_scenario(config: &SimConfig) -> Result<SimReport, SimError> {
    validate_events(config)?;
    let schedule = match &config.codec {
        CodecConfig::Off => None,
        CodecConfig::On {
            matrix,
            max_bit_degree,
        } => {
            let graph = TannerGraph::from_matrix(matrix);
            Some(build_stopping_set(&graph, *max_bit_degree)?)
        }
    };
    let mut master = SplitMix64::new(config.seed);
    let mut runner = Runner {
        config,
        schedule,
        tree: build_initial_tree(config, &mut master)?,
        members: BTreeMap::new(),
        master,
        transmissions: 0,
        group_key_history: Vec::new(),
        records: Vec::new(),
        audit: AuditTrail::default(),
    };
    runner.init_members()?;
    for (i, event) in config.events.iter().enumerate() {
        runner.apply_event(i + 1, event)?;
    }
    Ok(SimReport {
        seed: config.seed,
        channel_algorithm: ALGORITHM_ID,
        channel_desc: match &config.channel {
            ChannelConfig::Lossless => String::from("lossless"),
            ChannelConfig::Model(ChannelModel::Bsc {
                flip_probability, ..
            }) => format!("bsc p={flip_probability}"),
            ChannelConfig::Model(ChannelModel::Explicit { positions }) => {
                format!("explicit {positions:?}")
            }
        },
        codec_desc: match &config.codec {
            CodecConfig::Off => String::from("off"),
            CodecConfig::On { matrix, .. } => format!(
                "({},{}) block code",
                matrix.num_checks(),
                matrix.num_bits()
            ),
        },
        events: runner.records,
        audit: runner.audit,
    })
}

fn validate_events(config: &SimConfig) -> Result<(), SimError> {
    if config.initial_members.is_empty() {
        return Err(SimError::Config(String::from("no initial members")));
    }
    let mut current: Vec<&str> = Vec::new();
    for (id, _) in &config.initial_members {
        if id.is_empty() {
            return Err(SimError::Config(String::from("empty member id")));
        }
        if current.contains(&id.as_str()) {
            return Err(SimError::Config(format!("duplicate member {id}")));
        }
        current.push(id);
    }
    let explicit = config
        .initial_members
        .iter()
        .filter(|(_, at)| at.is_some())
        .count();
    if explicit != 0 && explicit != config.initial_members.len() {
        return Err(SimError::Config(String::from(
            "either all initial members carry explicit positions or none do",
        )));
    }
    for event in &config.events {
        match event {
            SimEvent::Join(id) => {
                if current.contains(&id.as_str()) {
                    return Err(SimError::Config(format!("join of existing member {id}")));
                }
                current.push(id);
            }
            SimEvent::Leave(id) => {
                let Some(pos) = current.iter().position(|m| m == id) else {
                    return Err(SimError::Config(format!("leave of unknown member {id}")));
                };
                if current.len() == 1 {
                    return Err(SimError::Config(String::from(
                        "events would empty the group",
                    )));
                }
                current.remove(pos);
            }
        }
    }
    Ok(())
}

fn build_initial_tree(config: &SimConfig, master: &mut SplitMix64) -> Result<KeyTree, SimError> {
    let secrets: Vec<Natural> = config
        .initial_members
        .iter()
        .map(|_| gen_secret_key(&config.params, master.next_u64(), config.key_mode))
        .collect();
    let explicit = config.initial_members.iter().all(|(_, at)| at.is_some());
    if explicit {
        let layout: Vec<(MemberId, NodeId, Natural)> = config
            .initial_members
            .iter()
            .zip(secrets)
            .map(|((id, at), secret)| (id.clone(), NodeId(at.unwrap()), secret))
            .collect();
        Ok(KeyTree::from_layout(
            config.params.clone(),
            config.derivation,
            &layout,
        )?)
    } else {
        let mut iter = config.initial_members.iter().zip(secrets);
        let ((first_id, _), first_secret) = iter.next().expect("validated nonempty");
        let mut tree = KeyTree::singleton(
            config.params.clone(),
            config.derivation,
            first_id.clone(),
            first_secret,
        )?;
        for ((id, _), secret) in iter {
            let (next, _) = tree.join_full(id.clone(), secret)?;
            tree = next;
        }
        Ok(tree)
    }
}

struct Runner<'a> {
    config: &'a SimConfig,
    schedule: Option<EncodingStoppingSet>,
    tree: KeyTree,
    members: BTreeMap<MemberId, MemberState>,
    master: SplitMix64,
    transmissions: u64,
    group_key_history: Vec<Natural>,
    records: Vec<EventRecord>,
    audit: AuditTrail,
}

struct Delivery {
    decode_trials: u64,
    correction_trials: u64,
    failures: Vec<String>,
}

impl Runner<'_> {
    fn init_members(&mut self) -> Result<(), SimError> {
        for (id, _) in &self.config.initial_members {
            let leaf = self.tree.member_leaf(id).expect("member placed");
            let secret = self
                .tree
                .node(leaf)
                .and_then(|n| n.secret.clone())
                .expect("initial members carry secrets");
            let state = MemberState::new(id.clone(), secret, &self.tree)?;
            self.members.insert(id.clone(), state);
        }
        let key = self.tree.group_key().cloned().expect("full tree has key");
        self.group_key_history.push(key.clone());
        let converged = self.converged_count(&key);
        self.records.push(EventRecord {
            index: 0,
            kind: String::from("init"),
            member: String::new(),
            updated_nodes: Vec::new(),
            broadcast_nodes: Vec::new(),
            group_key: natural_to_decimal(&key),
            converged,
            members: self.members.len(),
            decode_trials: 0,
            correction_trials: 0,
            failures: Vec::new(),
        });
        Ok(())
    }

    fn converged_count(&self, truth: &Natural) -> usize {
        self.members
            .values()
            .filter(|m| m.current_group_key.as_ref() == Some(truth))
            .count()
    }

    fn apply_event(&mut self, index: usize, event: &SimEvent) -> Result<(), SimError> {
        match event {
            SimEvent::Join(id) => self.apply_join(index, id),
            SimEvent::Leave(id) => self.apply_leave(index, id),
        }
    }

    fn apply_join(&mut self, index: usize, id: &MemberId) -> Result<(), SimError> {
        let secret = gen_secret_key(&self.config.params, self.master.next_u64(), self.config.key_mode);
        let public = compute_public(&self.config.params, &secret, self.config.derivation)?;
        let pre_view = self.tree.public_view();
        let prior_keys = self.group_key_history.clone();

        let (tree, rekey) = self.tree.join_full(id.clone(), secret.clone())?;
        self.tree = tree;
        let joiner_leaf = self.tree.member_leaf(id).expect("joiner placed");
        let support = self.tree.select_support_node(joiner_leaf)?;

        // Control traffic: everyone applies the structural change.
        let request = Message::join_request(id.clone(), joiner_leaf, public);
        let mut failures = Vec::new();
        for state in self.members.values_mut() {
            if let Err(e) = member_handle(state, &request) {
                failures.push(format!("{}:{e}", state.id));
            }
        }
        // The joiner bootstraps from a snapshot of the new public view.
        let joiner_state = MemberState::new(id.clone(), secret, &self.tree)?;
        self.members.insert(id.clone(), joiner_state);

        let mut delivery = self.deliver_rekey(&support, &rekey.broadcast_publics, &[id.clone()])?;
        failures.append(&mut delivery.failures);

        self.audit.joins.push(JoinAudit {
            event_index: index,
            member: id.clone(),
            knowledge: self.members[id].known_secrets.clone(),
            pre_view,
            prior_group_keys: prior_keys,
        });
        self.finish_event(index, "join", id, &rekey, delivery, failures);
        Ok(())
    }

    fn apply_leave(&mut self, index: usize, id: &MemberId) -> Result<(), SimError> {
        let departed = self
            .members
            .remove(id)
            .ok_or_else(|| SimError::Config(format!("leave of unknown member {id}")))?;
        let event_leaf = departed.leaf;
        let support = self.tree.select_support_node(event_leaf)?;
        let (tree, rekey) = self.tree.leave(id)?;
        self.tree = tree;

        let notice = Message::leave_notice(id.clone());
        let mut failures = Vec::new();
        for state in self.members.values_mut() {
            if let Err(e) = member_handle(state, &notice) {
                failures.push(format!("{}:{e}", state.id));
            }
        }

        let mut delivery = self.deliver_rekey(&support, &rekey.broadcast_publics, &[])?;
        failures.append(&mut delivery.failures);

        // The departed member's total knowledge: its fold cache plus its own
        // leaf secret.
        let mut knowledge = departed.known_secrets.clone();
        if !knowledge.iter().any(|(at, _)| *at == event_leaf) {
            knowledge.push((event_leaf, departed.secret.clone()));
        }
        let mut post_view = self.tree.public_view();
        for (node, public) in &rekey.broadcast_publics {
            post_view.merge_public(*node, public.clone())?;
        }
        self.audit.leaves.push(LeaveAudit {
            event_index: index,
            member: id.clone(),
            knowledge,
            post_view,
            new_group_key: rekey.new_group_key.clone(),
        });
        self.finish_event(index, "leave", id, &rekey, delivery, failures);
        Ok(())
    }

    /// Sends the rekey payload to every member except the support node (who
    /// computed it) and `skip` (the joiner, who bootstraps from a
    /// snapshot). Each receiving member gets its own derived channel
    /// stream; with the codec on, each block is a separate transmission.
    fn deliver_rekey(
        &mut self,
        support: &MemberId,
        payload: &[(NodeId, Natural)],
        skip: &[MemberId],
    ) -> Result<Delivery, SimError> {
        let mut delivery = Delivery {
            decode_trials: 0,
            correction_trials: 0,
            failures: Vec::new(),
        };
        let bits = payload::serialize(payload).map_err(SimError::Payload)?;
        let truth = self.tree.group_key().cloned().expect("full tree has key");
        let member_ids: Vec<MemberId> = self.members.keys().cloned().collect();
        for id in member_ids {
            let is_support = &id == support;
            let skipped = skip.contains(&id);
            let state = self.members.get_mut(&id).expect("member exists");
            let received: Result<Vec<(NodeId, Natural)>, String> = if is_support || skipped {
                Ok(payload.to_vec())
            } else {
                match &self.config.channel {
                    ChannelConfig::Lossless => Ok(payload.to_vec()),
                    ChannelConfig::Model(model) => match &self.schedule {
                        None => {
                            let derived = model.derive(self.transmissions);
                            self.transmissions += 1;
                            let (corrupted, _) = transmit_bits(&bits, &derived)?;
                            payload::deserialize(&corrupted).map_err(|e| format!("payload ({e})"))
                        }
                        Some(schedule) => {
                            let mut recovered_bits = Vec::new();
                            let mut failed = None;
                            for block in payload::to_blocks(&bits, schedule.info_len()) {
                                let word = schedule.encode(&block)?;
                                let derived = model.derive(self.transmissions);
                                self.transmissions += 1;
                                let (wire, _) = transmit_bits(&word.wire_bits, &derived)?;
                                let received_word = Codeword::from_wire_bits(schedule, wire)?;
                                match schedule.decode(&received_word) {
                                    Ok(outcome) => {
                                        delivery.decode_trials += outcome.trials;
                                        delivery.correction_trials += outcome.trials - 1;
                                        recovered_bits.extend(outcome.info);
                                    }
                                    Err(failure) => {
                                        delivery.decode_trials += failure.trials;
                                        delivery.correction_trials += failure.trials - 1;
                                        failed = Some(format!("decode ({failure})"));
                                        break;
                                    }
                                }
                            }
                            match failed {
                                Some(reason) => Err(reason),
                                None => payload::deserialize(&recovered_bits)
                                    .map_err(|e| format!("payload ({e})")),
                            }
                        }
                    },
                }
            };
            match received {
                Ok(pairs) => {
                    let msg = Message::rekey(support.clone(), pairs);
                    if let Err(e) = member_handle(state, &msg) {
                        delivery.failures.push(format!("{id}:apply ({e})"));
                    } else if state.current_group_key.as_ref() != Some(&truth) {
                        delivery.failures.push(format!("{id}:diverged"));
                    }
                }
                Err(reason) => {
                    delivery.failures.push(format!("{id}:{reason}"));
                }
            }
        }
        Ok(delivery)
    }

    fn finish_event(
        &mut self,
        index: usize,
        kind: &str,
        member: &MemberId,
        rekey: &crate::keytree::RekeyResult,
        delivery: Delivery,
        failures: Vec<String>,
    ) {
        let truth = self.tree.group_key().cloned().expect("full tree has key");
        self.group_key_history.push(truth.clone());
        self.records.push(EventRecord {
            index,
            kind: kind.to_string(),
            member: member.clone(),
            updated_nodes: rekey.updated_nodes.iter().map(|n| n.0).collect(),
            broadcast_nodes: rekey.broadcast_publics.iter().map(|(n, _)| n.0).collect(),
            group_key: natural_to_decimal(&truth),
            converged: self.converged_count(&truth),
            members: self.members.len(),
            decode_trials: delivery.decode_trials,
            correction_trials: delivery.correction_trials,
            failures,
        });
    }
}
