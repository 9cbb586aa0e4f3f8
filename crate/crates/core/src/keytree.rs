//! The binary key tree: per-node key derivation, key paths, insertion and
//! support selection, and the join/leave rekey transactions.
//!
//! Nodes are addressed by heap indices: the root is 0 and node `v` has
//! children `2v+1` and `2v+2`. Every node carries an optional secret key and
//! an optional public (blinded) key `PK_v = y^phi(K_v) mod p`. A member
//! occupies one leaf, holds the secrets along its key path (leaf to root),
//! and knows the public keys of everything else. The secret of an internal
//! node is derived from one child's secret and the other child's public key:
//!
//! ```text
//!   K_v = PK_right ^ phi(K_left)  =  PK_left ^ phi(K_right)   (mod p)
//! ```
//!
//! which both children can evaluate, and which commutes because both sides
//! equal `y^(phi(K_left) * phi(K_right))`.
//!
//! A tree value is immutable through transactions: `join` and `leave` return
//! a new tree plus a [`RekeyResult`] describing the refreshed ancestor chain
//! and the public keys that must be broadcast.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::modmath::{
    euler_totient, mod_exp, natural_to_decimal, GroupParams, ModMathError, Natural,
};

/// Opaque member identifier.
pub type MemberId = String;

/// Heap-style tree address; root is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn left(self) -> NodeId {
        NodeId(2 * self.0 + 1)
    }

    pub fn right(self) -> NodeId {
        NodeId(2 * self.0 + 2)
    }

    pub fn parent(self) -> Option<NodeId> {
        if self.0 == 0 {
            None
        } else {
            Some(NodeId((self.0 - 1) / 2))
        }
    }

    pub fn sibling(self) -> Option<NodeId> {
        let parent = self.parent()?;
        Some(if self.0 % 2 == 1 {
            parent.right()
        } else {
            parent.left()
        })
    }

    pub fn depth(self) -> u32 {
        (self.0 + 1).ilog2()
    }

    fn is_ancestor_of(self, other: NodeId) -> bool {
        let mut v = other;
        while let Some(p) = v.parent() {
            if p == self {
                return true;
            }
            v = p;
        }
        false
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which exponent blinds and folds keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Derivation {
    /// Exponent is the totient of the secret (the protocol under test).
    #[default]
    Totient,
    /// Exponent is the secret itself, a plain Diffie-Hellman baseline with
    /// the same tree mechanics. Used for cost comparisons.
    PlainDh,
}

impl Derivation {
    fn exponent(self, secret: &Natural) -> Result<Natural, ModMathError> {
        match self {
            Derivation::Totient => euler_totient(secret),
            Derivation::PlainDh => Ok(secret.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyTreeError {
    NotAMember,
    AlreadyMember,
    CannotEmptyGroup,
    /// A sibling public key needed for the fold is unknown. This is the
    /// error the error-correction layer exists to prevent.
    InsufficientInformation { node: NodeId },
    /// Neither child of a chain node carries a usable secret.
    MissingSecret { node: NodeId },
    /// A broadcast referenced a node the local shape does not have.
    StaleView { node: NodeId },
    InvalidLayout(&'static str),
    OutOfRange(&'static str),
    Math(ModMathError),
}

impl fmt::Display for KeyTreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyTreeError::NotAMember => write!(f, "not a member of this tree"),
            KeyTreeError::AlreadyMember => write!(f, "member id already present"),
            KeyTreeError::CannotEmptyGroup => write!(f, "cannot remove the last member"),
            KeyTreeError::InsufficientInformation { node } => {
                write!(f, "missing sibling public key at node {node}")
            }
            KeyTreeError::MissingSecret { node } => {
                write!(f, "no child secret available to derive node {node}")
            }
            KeyTreeError::StaleView { node } => {
                write!(f, "broadcast references unknown node {node}")
            }
            KeyTreeError::InvalidLayout(why) => write!(f, "invalid tree layout: {why}"),
            KeyTreeError::OutOfRange(what) => write!(f, "out of range: {what}"),
            KeyTreeError::Math(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for KeyTreeError {}

impl From<ModMathError> for KeyTreeError {
    fn from(e: ModMathError) -> Self {
        KeyTreeError::Math(e)
    }
}

/// One tree position: optional secret, optional blinded key, optional
/// occupant (leaves only).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyNode {
    pub secret: Option<Natural>,
    pub public: Option<Natural>,
    pub occupant: Option<MemberId>,
}

/// Outcome of a join or leave transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RekeyResult {
    /// Nodes whose secret changed, ordered leaf-side first and always ending
    /// at the root. The chain length equals the depth of the event leaf.
    pub updated_nodes: Vec<NodeId>,
    /// Public keys to broadcast: the updated nodes minus the root.
    pub broadcast_publics: Vec<(NodeId, Natural)>,
    /// The new root secret.
    pub new_group_key: Natural,
}

/// `PK = y^e mod p` where `e` is the derivation exponent of `secret`.
pub fn compute_public(
    params: &GroupParams,
    secret: &Natural,
    derivation: Derivation,
) -> Result<Natural, KeyTreeError> {
    check_residue(params, secret)?;
    let exponent = derivation.exponent(secret)?;
    Ok(mod_exp(params.base(), &exponent, params.modulus())?)
}

/// `sibling_public^e mod p` where `e` is the derivation exponent of
/// `own_secret`. Symmetric: swapping roles yields the identical node key.
pub fn compute_node_secret(
    params: &GroupParams,
    own_secret: &Natural,
    sibling_public: &Natural,
    derivation: Derivation,
) -> Result<Natural, KeyTreeError> {
    check_residue(params, own_secret)?;
    check_residue(params, sibling_public)?;
    let exponent = derivation.exponent(own_secret)?;
    Ok(mod_exp(sibling_public, &exponent, params.modulus())?)
}

fn check_residue(params: &GroupParams, value: &Natural) -> Result<(), KeyTreeError> {
    use num_traits::Zero;
    if value.is_zero() || value >= params.modulus() {
        return Err(KeyTreeError::OutOfRange("value must lie in [1, p)"));
    }
    Ok(())
}

/// The key tree itself. Full-knowledge instances (all secrets present) drive
/// simulations and tests; stripped instances ([`KeyTree::public_view`])
/// serve as each member's partial view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTree {
    params: GroupParams,
    derivation: Derivation,
    nodes: BTreeMap<NodeId, KeyNode>,
    members: BTreeMap<MemberId, NodeId>,
}

impl KeyTree {
    /// A one-member tree: the member's leaf is the root.
    pub fn singleton(
        params: GroupParams,
        derivation: Derivation,
        member: MemberId,
        secret: Natural,
    ) -> Result<Self, KeyTreeError> {
        let public = compute_public(&params, &secret, derivation)?;
        let mut nodes = BTreeMap::new();
        nodes.insert(
            NodeId::ROOT,
            KeyNode {
                secret: Some(secret),
                public: Some(public),
                occupant: Some(member.clone()),
            },
        );
        let mut members = BTreeMap::new();
        members.insert(member, NodeId::ROOT);
        Ok(KeyTree {
            params,
            derivation,
            nodes,
            members,
        })
    }

    /// Builds a tree with explicitly placed leaves. The leaf set must close
    /// into a full binary tree (every internal node has both subtrees).
    pub fn from_layout(
        params: GroupParams,
        derivation: Derivation,
        leaves: &[(MemberId, NodeId, Natural)],
    ) -> Result<Self, KeyTreeError> {
        if leaves.is_empty() {
            return Err(KeyTreeError::InvalidLayout("no leaves"));
        }
        let mut nodes: BTreeMap<NodeId, KeyNode> = BTreeMap::new();
        let mut members: BTreeMap<MemberId, NodeId> = BTreeMap::new();
        for (id, at, secret) in leaves {
            let public = compute_public(&params, secret, derivation)?;
            if nodes.contains_key(at) {
                return Err(KeyTreeError::InvalidLayout("duplicate leaf position"));
            }
            if members.contains_key(id) {
                return Err(KeyTreeError::InvalidLayout("duplicate member id"));
            }
            nodes.insert(
                *at,
                KeyNode {
                    secret: Some(secret.clone()),
                    public: Some(public),
                    occupant: Some(id.clone()),
                },
            );
            members.insert(id.clone(), *at);
        }
        // Close over ancestors.
        let leaf_ids: Vec<NodeId> = nodes.keys().copied().collect();
        for leaf in &leaf_ids {
            let mut v = *leaf;
            while let Some(p) = v.parent() {
                if nodes.contains_key(&p) && nodes[&p].occupant.is_some() {
                    return Err(KeyTreeError::InvalidLayout("leaf is an ancestor of a leaf"));
                }
                nodes.entry(p).or_default();
                v = p;
            }
        }
        let mut tree = KeyTree {
            params,
            derivation,
            nodes,
            members,
        };
        // Fullness: every internal node needs both children present.
        let internal: Vec<NodeId> = tree
            .nodes
            .iter()
            .filter(|(_, n)| n.occupant.is_none())
            .map(|(id, _)| *id)
            .collect();
        for v in &internal {
            if !tree.nodes.contains_key(&v.left()) || !tree.nodes.contains_key(&v.right()) {
                return Err(KeyTreeError::InvalidLayout("internal node missing a child"));
            }
        }
        // Children before parents: heap indices decrease toward the root.
        let mut order = internal;
        order.sort_unstable_by(|a, b| b.cmp(a));
        for v in order {
            tree.derive_node(v)?;
        }
        Ok(tree)
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn derivation(&self) -> Derivation {
        self.derivation
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn member_leaf(&self, id: &str) -> Option<NodeId> {
        self.members.get(id).copied()
    }

    pub fn members(&self) -> impl Iterator<Item = (&MemberId, NodeId)> {
        self.members.iter().map(|(id, at)| (id, *at))
    }

    pub fn node(&self, id: NodeId) -> Option<&KeyNode> {
        self.nodes.get(&id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// The root secret, when known.
    pub fn group_key(&self) -> Option<&Natural> {
        self.nodes.get(&NodeId::ROOT)?.secret.as_ref()
    }

    /// Occupied leaves, ascending by index.
    pub fn occupied_leaves(&self) -> Vec<NodeId> {
        self.members.values().copied().collect::<alloc::collections::BTreeSet<_>>().into_iter().collect()
    }

    /// `[leaf, parent(leaf), ..., root]` for an occupied leaf.
    pub fn key_path(&self, leaf: NodeId) -> Result<Vec<NodeId>, KeyTreeError> {
        match self.nodes.get(&leaf) {
            Some(node) if node.occupant.is_some() => {}
            _ => return Err(KeyTreeError::NotAMember),
        }
        let mut path = alloc::vec![leaf];
        let mut v = leaf;
        while let Some(p) = v.parent() {
            path.push(p);
            v = p;
        }
        Ok(path)
    }

    /// The leaf where the next member is inserted: the rightmost one among
    /// the leaves of minimum depth. For a fully balanced tree this is the
    /// rightmost leaf overall.
    pub fn find_insertion_point(&self) -> NodeId {
        self.members
            .values()
            .copied()
            .min_by_key(|v| (v.depth(), usize::MAX - v.0))
            .expect("tree always holds at least one member")
    }

    /// The member designated to perform the rekey for an event at
    /// `event_leaf`: the occupant of the sibling leaf, or the rightmost
    /// shallowest leaf of the sibling subtree.
    pub fn select_support_node(&self, event_leaf: NodeId) -> Result<MemberId, KeyTreeError> {
        let sibling = event_leaf.sibling().ok_or(KeyTreeError::NotAMember)?;
        let node = self.nodes.get(&sibling).ok_or(KeyTreeError::NotAMember)?;
        if let Some(id) = &node.occupant {
            return Ok(id.clone());
        }
        self.members
            .iter()
            .filter(|(_, at)| sibling.is_ancestor_of(**at))
            .min_by_key(|(_, at)| (at.depth(), usize::MAX - at.0))
            .map(|(id, _)| id.clone())
            .ok_or(KeyTreeError::NotAMember)
    }

    /// Adds a member knowing only its blinded key. The tree derives the new
    /// ancestor chain from the insertion-side secrets.
    pub fn join(
        &self,
        member: MemberId,
        public: Natural,
    ) -> Result<(KeyTree, RekeyResult), KeyTreeError> {
        self.join_impl(member, public, None)
    }

    /// Adds a member whose secret the tree records, as full-knowledge
    /// simulations need.
    pub fn join_full(
        &self,
        member: MemberId,
        secret: Natural,
    ) -> Result<(KeyTree, RekeyResult), KeyTreeError> {
        let public = compute_public(&self.params, &secret, self.derivation)?;
        self.join_impl(member, public, Some(secret))
    }

    fn join_impl(
        &self,
        member: MemberId,
        public: Natural,
        secret: Option<Natural>,
    ) -> Result<(KeyTree, RekeyResult), KeyTreeError> {
        check_residue(&self.params, &public)?;
        let mut tree = self.clone();
        let insertion = tree.splice_in(&member, public, secret)?;
        let updated = tree.recompute_chain(insertion)?;
        let result = tree.rekey_result(updated)?;
        Ok((tree, result))
    }

    /// Structural half of a join, shared with members' partial views: the
    /// insertion leaf's occupant moves to its left child, the joiner takes
    /// the right child, and the vacated position becomes an internal node
    /// with no keys yet. The now-stale keys of the ancestor chain are
    /// dropped; a rekey or broadcast fills them back in. Returns the new
    /// internal node.
    pub fn splice_in(
        &mut self,
        member: &MemberId,
        public: Natural,
        secret: Option<Natural>,
    ) -> Result<NodeId, KeyTreeError> {
        if self.members.contains_key(member) {
            return Err(KeyTreeError::AlreadyMember);
        }
        let insertion = self.find_insertion_point();
        let old_leaf = self
            .nodes
            .insert(insertion, KeyNode::default())
            .expect("insertion point exists");
        let moved = old_leaf
            .occupant
            .clone()
            .expect("insertion point is occupied");
        self.nodes.insert(insertion.left(), old_leaf);
        self.members.insert(moved, insertion.left());
        self.nodes.insert(
            insertion.right(),
            KeyNode {
                secret,
                public: Some(public),
                occupant: Some(member.clone()),
            },
        );
        self.members.insert(member.clone(), insertion.right());
        self.clear_keys_above(insertion);
        Ok(insertion)
    }

    /// Removes a member. The departed leaf's sibling subtree is promoted one
    /// level and the chain from the promoted position to the root is rekeyed.
    pub fn leave(&self, member: &str) -> Result<(KeyTree, RekeyResult), KeyTreeError> {
        let mut tree = self.clone();
        let promoted = tree.splice_out(member)?;
        let mut updated = alloc::vec![promoted];
        if let Some(above) = promoted.parent() {
            updated.extend(tree.recompute_chain(above)?);
        }
        let result = tree.rekey_result(updated)?;
        Ok((tree, result))
    }

    /// Structural half of a leave: removes the member's leaf and re-homes
    /// the sibling subtree onto the parent position. Key material moves
    /// with the subtree; the stale keys of the ancestor chain above the
    /// promoted position are dropped until a rekey or broadcast renews
    /// them. Returns the promoted position.
    pub fn splice_out(&mut self, member: &str) -> Result<NodeId, KeyTreeError> {
        let leaf = *self.members.get(member).ok_or(KeyTreeError::NotAMember)?;
        if self.members.len() == 1 {
            return Err(KeyTreeError::CannotEmptyGroup);
        }
        let parent = leaf.parent().expect("non-root leaf in a multi-member tree");
        let sibling = leaf.sibling().expect("non-root leaf has a sibling");
        self.nodes.remove(&leaf);
        self.members.remove(member);
        // Collect the sibling subtree, then re-home it onto `parent`.
        let mut moved: Vec<(NodeId, KeyNode)> = Vec::new();
        let mut stack = alloc::vec![(sibling, parent)];
        while let Some((old, new)) = stack.pop() {
            let Some(node) = self.nodes.remove(&old) else {
                continue;
            };
            stack.push((old.left(), new.left()));
            stack.push((old.right(), new.right()));
            moved.push((new, node));
        }
        for (new, node) in moved {
            if let Some(id) = &node.occupant {
                self.members.insert(id.clone(), new);
            }
            self.nodes.insert(new, node);
        }
        self.clear_keys_above(parent);
        Ok(parent)
    }

    fn clear_keys_above(&mut self, from: NodeId) {
        let mut v = from.parent();
        while let Some(node) = v {
            if let Some(entry) = self.nodes.get_mut(&node) {
                entry.secret = None;
                entry.public = None;
            }
            v = node.parent();
        }
    }

    /// Re-derives secrets from `from` up to the root, using whichever child
    /// of each chain node carries a secret. Returns the chain.
    fn recompute_chain(&mut self, from: NodeId) -> Result<Vec<NodeId>, KeyTreeError> {
        let mut chain = Vec::new();
        let mut v = Some(from);
        while let Some(node) = v {
            self.derive_node(node)?;
            chain.push(node);
            v = node.parent();
        }
        Ok(chain)
    }

    fn derive_node(&mut self, v: NodeId) -> Result<(), KeyTreeError> {
        let (left, right) = (v.left(), v.right());
        let pick = |own: &Option<&KeyNode>, sib: &Option<&KeyNode>| -> Option<(Natural, Natural)> {
            let own_secret = own.as_ref()?.secret.clone()?;
            let sibling_public = sib.as_ref()?.public.clone()?;
            Some((own_secret, sibling_public))
        };
        let l = self.nodes.get(&left);
        let r = self.nodes.get(&right);
        let (own, sibling_public) = pick(&l, &r)
            .or_else(|| pick(&r, &l))
            .ok_or(KeyTreeError::MissingSecret { node: v })?;
        let secret = compute_node_secret(&self.params, &own, &sibling_public, self.derivation)?;
        let public = compute_public(&self.params, &secret, self.derivation)?;
        let node = self.nodes.entry(v).or_default();
        node.secret = Some(secret);
        node.public = Some(public);
        Ok(())
    }

    fn rekey_result(&self, updated: Vec<NodeId>) -> Result<RekeyResult, KeyTreeError> {
        let new_group_key = self
            .group_key()
            .cloned()
            .ok_or(KeyTreeError::MissingSecret { node: NodeId::ROOT })?;
        let mut broadcast = Vec::new();
        for v in &updated {
            if *v == NodeId::ROOT {
                continue;
            }
            let public = self
                .nodes
                .get(v)
                .and_then(|n| n.public.clone())
                .ok_or(KeyTreeError::MissingSecret { node: *v })?;
            broadcast.push((*v, public));
        }
        Ok(RekeyResult {
            updated_nodes: updated,
            broadcast_publics: broadcast,
            new_group_key,
        })
    }

    /// Folds node keys from `leaf` to the root and returns the group key.
    ///
    /// Sibling public keys are taken from `received` first (later entries
    /// win), then from the tree's own nodes. A missing sibling public is an
    /// [`KeyTreeError::InsufficientInformation`] naming the blocked node.
    pub fn compute_group_key(
        &self,
        leaf: NodeId,
        received: &[(NodeId, Natural)],
    ) -> Result<Natural, KeyTreeError> {
        let mut own = self
            .nodes
            .get(&leaf)
            .and_then(|n| n.secret.clone())
            .ok_or(KeyTreeError::MissingSecret { node: leaf })?;
        let mut v = leaf;
        while let Some(parent) = v.parent() {
            let sibling = v.sibling().expect("non-root node has a sibling");
            let sibling_public = received
                .iter()
                .rev()
                .find(|(at, _)| *at == sibling)
                .map(|(_, pk)| pk.clone())
                .or_else(|| self.nodes.get(&sibling).and_then(|n| n.public.clone()))
                .ok_or(KeyTreeError::InsufficientInformation { node: sibling })?;
            own = compute_node_secret(&self.params, &own, &sibling_public, self.derivation)?;
            v = parent;
        }
        Ok(own)
    }

    /// Stores a broadcast public key. The node must exist in this view.
    pub fn merge_public(&mut self, at: NodeId, public: Natural) -> Result<(), KeyTreeError> {
        check_residue(&self.params, &public)?;
        match self.nodes.get_mut(&at) {
            Some(node) => {
                node.public = Some(public);
                Ok(())
            }
            None => Err(KeyTreeError::StaleView { node: at }),
        }
    }

    /// Installs a secret at a node of a partial view (a member's own leaf,
    /// typically).
    pub fn install_secret(&mut self, at: NodeId, secret: Natural) -> Result<(), KeyTreeError> {
        check_residue(&self.params, &secret)?;
        match self.nodes.get_mut(&at) {
            Some(node) => {
                node.secret = Some(secret);
                Ok(())
            }
            None => Err(KeyTreeError::StaleView { node: at }),
        }
    }

    /// This tree with every secret stripped: shape, occupants and public
    /// keys only.
    pub fn public_view(&self) -> KeyTree {
        let mut view = self.clone();
        for node in view.nodes.values_mut() {
            node.secret = None;
        }
        view
    }

    /// Structured text snapshot of the public state, one node per line.
    pub fn snapshot(&self) -> String {
        self.render(false)
    }

    /// Snapshot including secrets. Debug use only.
    pub fn snapshot_full(&self) -> String {
        self.render(true)
    }

    fn render(&self, with_secrets: bool) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "keytree p={} y={} derivation={} members={}",
            natural_to_decimal(self.params.modulus()),
            natural_to_decimal(self.params.base()),
            match self.derivation {
                Derivation::Totient => "totient",
                Derivation::PlainDh => "plain-dh",
            },
            self.members.len()
        );
        for (id, node) in &self.nodes {
            let _ = write!(
                out,
                "node {} depth {} occupant {} public {}",
                id,
                id.depth(),
                node.occupant.as_deref().unwrap_or("-"),
                node.public
                    .as_ref()
                    .map(natural_to_decimal)
                    .unwrap_or_else(|| String::from("-")),
            );
            if with_secrets {
                let _ = write!(
                    out,
                    " secret {}",
                    node.secret
                        .as_ref()
                        .map(natural_to_decimal)
                        .unwrap_or_else(|| String::from("-")),
                );
            }
            out.push('\n');
        }
        out
    }

    /// Checks the structural and key-consistency invariants, for tests and
    /// debugging.
    pub fn validate(&self) -> Result<(), KeyTreeError> {
        for (id, at) in &self.members {
            match self.nodes.get(at) {
                Some(node) if node.occupant.as_ref() == Some(id) => {}
                _ => return Err(KeyTreeError::InvalidLayout("member index out of sync")),
            }
        }
        for (at, node) in &self.nodes {
            let has_left = self.nodes.contains_key(&at.left());
            let has_right = self.nodes.contains_key(&at.right());
            match node.occupant {
                Some(_) => {
                    if has_left || has_right {
                        return Err(KeyTreeError::InvalidLayout("occupied node has children"));
                    }
                }
                None => {
                    if !(has_left && has_right) {
                        return Err(KeyTreeError::InvalidLayout(
                            "internal node lacks two children",
                        ));
                    }
                }
            }
            if let (Some(secret), Some(public)) = (&node.secret, &node.public) {
                if compute_public(&self.params, secret, self.derivation)? != *public {
                    return Err(KeyTreeError::InvalidLayout("public key inconsistent"));
                }
            }
        }
        Ok(())
    }
}
