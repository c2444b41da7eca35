//! Artistic knowledge graph over paintings and their attribute values.
//!
//! Paintings connect to their Type, Timeframe, Author, Material, Support and
//! title Keyword nodes. Schools hang off authors, never off paintings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{KeywordSet, PaintingRecord, TechniqueGrammar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeFamily {
    Painting,
    Author,
    School,
    Type,
    Timeframe,
    Material,
    Support,
    Keyword,
}

impl NodeFamily {
    pub const ALL: [NodeFamily; 8] = [
        NodeFamily::Painting,
        NodeFamily::Author,
        NodeFamily::School,
        NodeFamily::Type,
        NodeFamily::Timeframe,
        NodeFamily::Material,
        NodeFamily::Support,
        NodeFamily::Keyword,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NodeFamily::Painting => "painting",
            NodeFamily::Author => "author",
            NodeFamily::School => "school",
            NodeFamily::Type => "type",
            NodeFamily::Timeframe => "timeframe",
            NodeFamily::Material => "material",
            NodeFamily::Support => "support",
            NodeFamily::Keyword => "keyword",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        NodeFamily::ALL.into_iter().find(|f| f.name() == s)
    }
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub family: NodeFamily,
    pub key: String,
}

impl NodeRef {
    pub fn new(family: NodeFamily, key: impl Into<String>) -> Self {
        Self {
            family,
            key: key.into(),
        }
    }

    pub fn painting(id: &str) -> Self {
        Self::new(NodeFamily::Painting, normalize_key(id, false))
    }

    /// `family/key`, the id used in embedding files.
    pub fn qualified(&self) -> String {
        format!("{}/{}", self.family, self.key)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.family, self.key)
    }
}

fn normalize_key(raw: &str, fold_case: bool) -> String {
    let joined = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if fold_case {
        joined.to_lowercase()
    } else {
        joined
    }
}

/// Material, support and keyword values derived for one record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DerivedAttributes {
    pub material: Option<String>,
    pub support: Option<String>,
    pub keywords: Vec<String>,
}

pub fn derive_attributes(
    records: &[PaintingRecord],
    grammar: &TechniqueGrammar,
    keywords: &KeywordSet,
) -> Vec<DerivedAttributes> {
    records
        .iter()
        .map(|r| {
            let (material, support) = grammar.parse(&r.technique);
            DerivedAttributes {
                material,
                support,
                keywords: keywords.match_title(&r.title),
            }
        })
        .collect()
}

/// Undirected simple graph with dense node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    nodes: Vec<NodeRef>,
    index: HashMap<NodeRef, usize>,
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl KnowledgeGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &NodeRef {
        &self.nodes[id]
    }

    pub fn id_of(&self, node: &NodeRef) -> Option<usize> {
        self.index.get(node).copied()
    }

    /// Sorted neighbour ids.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency
            .get(a)
            .is_some_and(|n| n.binary_search(&b).is_ok())
    }

    /// Edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, ns)| {
            ns.iter().copied().filter(move |&b| a < b).map(move |b| (a, b))
        })
    }

    /// Builds a graph from node refs and edges between them. Node ids follow
    /// `(family, key)` order regardless of input order.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = NodeRef>,
        edges: impl IntoIterator<Item = (NodeRef, NodeRef)>,
    ) -> Result<Self> {
        let sorted: BTreeSet<NodeRef> = nodes.into_iter().collect();
        let nodes: Vec<NodeRef> = sorted.into_iter().collect();
        let index: HashMap<NodeRef, usize> =
            nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::Graph(format!("edge endpoint {a} is not a node")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::Graph(format!("edge endpoint {b} is not a node")))?;
            if ia == ib {
                return Err(Error::Graph(format!("self-loop on {a}")));
            }
            edge_set.insert((ia.min(ib), ia.max(ib)));
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in &edge_set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            nodes,
            index,
            adjacency,
            edge_count: edge_set.len(),
        })
    }

    /// Ids of painting nodes keyed by record id.
    pub fn painting_ids(&self) -> BTreeMap<String, usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.family == NodeFamily::Painting)
            .map(|(i, n)| (n.key.clone(), i))
            .collect()
    }
}

/// Connects each training painting to its attribute nodes and each author to
/// its schools. Attribute keys are case-folded and whitespace-normalised;
/// empty values create no node.
pub fn build_graph(
    records: &[PaintingRecord],
    derived: &[DerivedAttributes],
) -> Result<KnowledgeGraph> {
    if records.len() != derived.len() {
        return Err(Error::InvalidArgument(format!(
            "{} records but {} derived attribute rows",
            records.len(),
            derived.len()
        )));
    }
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    let attr = |family: NodeFamily, raw: &str| -> Option<NodeRef> {
        let key = normalize_key(raw, true);
        (!key.is_empty()).then(|| NodeRef::new(family, key))
    };
    for (record, extra) in records.iter().zip(derived) {
        let painting = NodeRef::painting(&record.id);
        if painting.key.is_empty() {
            return Err(Error::InvalidArgument("record with empty id".into()));
        }
        nodes.insert(painting.clone());
        let author = attr(NodeFamily::Author, &record.author);
        let mut linked: Vec<NodeRef> = [
            attr(NodeFamily::Type, &record.kind),
            attr(NodeFamily::Timeframe, &record.timeframe),
            author.clone(),
            extra
                .material
                .as_deref()
                .and_then(|m| attr(NodeFamily::Material, m)),
            extra
                .support
                .as_deref()
                .and_then(|s| attr(NodeFamily::Support, s)),
        ]
        .into_iter()
        .flatten()
        .collect();
        linked.extend(
            extra
                .keywords
                .iter()
                .filter_map(|k| attr(NodeFamily::Keyword, k)),
        );
        for node in linked {
            nodes.insert(node.clone());
            edges.push((painting.clone(), node));
        }
        if let (Some(author), Some(school)) = (author, attr(NodeFamily::School, &record.school)) {
            nodes.insert(school.clone());
            edges.push((author, school));
        }
    }
    KnowledgeGraph::from_parts(nodes, edges)
}

/// Per-family node counts and total edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: BTreeMap<NodeFamily, usize>,
    pub total_nodes: usize,
    pub edges: usize,
}

impl GraphStats {
    pub fn family(&self, family: NodeFamily) -> usize {
        self.nodes.get(&family).copied().unwrap_or(0)
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes={}", self.total_nodes)?;
        writeln!(f, "edges={}", self.edges)?;
        for family in NodeFamily::ALL {
            writeln!(f, "nodes.{}={}", family, self.family(family))?;
        }
        Ok(())
    }
}

pub fn graph_stats(g: &KnowledgeGraph) -> GraphStats {
    let mut nodes: BTreeMap<NodeFamily, usize> =
        NodeFamily::ALL.into_iter().map(|f| (f, 0)).collect();
    for n in g.nodes() {
        *nodes.entry(n.family).or_default() += 1;
    }
    GraphStats {
        nodes,
        total_nodes: g.node_count(),
        edges: g.edge_count(),
    }
}

/// Verifies the painting-to-attribute bipartite layout, with author–school
/// as the only attribute–attribute link.
pub fn check_structure(g: &KnowledgeGraph) -> Result<()> {
    use NodeFamily::*;
    for (a, b) in g.edges() {
        let (fa, fb) = (g.node(a).family, g.node(b).family);
        let ok = matches!(
            (fa, fb),
            (Painting, Type | Timeframe | Author | Material | Support | Keyword)
                | (Type | Timeframe | Author | Material | Support | Keyword, Painting)
                | (Author, School)
                | (School, Author)
        );
        if !ok {
            return Err(Error::Graph(format!(
                "forbidden edge {} -- {}",
                g.node(a),
                g.node(b)
            )));
        }
    }
    for (id, list) in g.adjacency.iter().enumerate() {
        for &n in list {
            if n == id || !g.has_edge(n, id) {
                return Err(Error::Graph(format!("inconsistent adjacency at {}", g.node(id))));
            }
        }
    }
    Ok(())
}

pub const GRAPH_MAGIC: &str = "#ARTCTXG1";

/// Serialises as `#node <id> <family> <key>` and `#edge <id> <id>` lines
/// after a magic header line.
pub fn graph_to_text(g: &KnowledgeGraph) -> String {
    let mut out = String::from(GRAPH_MAGIC);
    out.push('\n');
    for (id, n) in g.nodes().iter().enumerate() {
        out.push_str(&format!("#node {id} {} {}\n", n.family, n.key));
    }
    for (a, b) in g.edges() {
        out.push_str(&format!("#edge {a} {b}\n"));
    }
    out
}

pub fn graph_from_text(text: &str) -> Result<KnowledgeGraph> {
    let mut by_id: HashMap<usize, NodeRef> = HashMap::new();
    let mut seen: std::collections::HashSet<NodeRef> = Default::default();
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (line_no == 1 && line == GRAPH_MAGIC) {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#node ") {
            let mut parts = rest.splitn(3, ' ');
            let id = parts
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| perr("bad node id".into()))?;
            let family = parts
                .next()
                .and_then(NodeFamily::parse)
                .ok_or_else(|| perr("bad node family".into()))?;
            let key = parts.next().unwrap_or("").trim();
            if key.is_empty() {
                return Err(perr("empty node key".into()));
            }
            let node = NodeRef::new(family, key);
            if !seen.insert(node.clone()) {
                return Err(perr(format!("duplicate node {node}")));
            }
            if by_id.insert(id, node).is_some() {
                return Err(perr(format!("duplicate node id {id}")));
            }
        } else if let Some(rest) = line.strip_prefix("#edge ") {
            let ids: Vec<usize> = rest
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr("bad edge endpoint".into()))?;
            if ids.len() != 2 {
                return Err(perr("edge needs two endpoints".into()));
            }
            edges.push((line_no, ids[0], ids[1]));
        } else {
            return Err(perr(format!("unrecognised line `{line}`")));
        }
    }
    let mut resolved = Vec::with_capacity(edges.len());
    for (line, a, b) in edges {
        let na = by_id.get(&a).ok_or_else(|| Error::Parse {
            line,
            message: format!("dangling edge endpoint {a}"),
        })?;
        let nb = by_id.get(&b).ok_or_else(|| Error::Parse {
            line,
            message: format!("dangling edge endpoint {b}"),
        })?;
        if a == b {
            return Err(Error::Parse {
                line,
                message: "self-loop".into(),
            });
        }
        resolved.push((na.clone(), nb.clone()));
    }
    KnowledgeGraph::from_parts(by_id.into_values(), resolved)
}

pub fn save_graph(g: &KnowledgeGraph, path: &Path) -> Result<()> {
    std::fs::write(path, graph_to_text(g)).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    graph_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, author: &str, school: &str, kind: &str) -> PaintingRecord {
        PaintingRecord {
            id: id.into(),
            author: author.into(),
            school: school.into(),
            kind: kind.into(),
            ..Default::default()
        }
    }

    fn fixture() -> KnowledgeGraph {
        let records = vec![rec("p1", "X", "S", "portrait"), rec("p2", "X", "S", "landscape")];
        build_graph(&records, &vec![DerivedAttributes::default(); 2]).unwrap()
    }

    #[test]
    fn two_paintings_shared_author() {
        let g = fixture();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edge_count(), 5);
        let stats = graph_stats(&g);
        assert_eq!(stats.family(NodeFamily::Painting), 2);
        assert_eq!(stats.family(NodeFamily::Author), 1);
        assert_eq!(stats.family(NodeFamily::School), 1);
        assert_eq!(stats.family(NodeFamily::Type), 2);
        assert_eq!(stats.edges, 5);
        check_structure(&g).unwrap();
        let school = g.id_of(&NodeRef::new(NodeFamily::School, "s")).unwrap();
        let author = g.id_of(&NodeRef::new(NodeFamily::Author, "x")).unwrap();
        assert_eq!(g.neighbors(school), [author]);
    }

    #[test]
    fn empty_record_is_isolated() {
        let g = build_graph(&[rec("p", "", "", "")], &[DerivedAttributes::default()]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn empty_graph_stats() {
        let stats = graph_stats(&KnowledgeGraph::default());
        assert_eq!(stats.total_nodes, 0);
        assert_eq!(stats.edges, 0);
        assert!(stats.nodes.values().all(|&c| c == 0));
    }

    #[test]
    fn keys_are_case_folded() {
        let records = vec![rec("a", "Van  Gogh", "", ""), rec("b", "van gogh", "", "")];
        let g = build_graph(&records, &vec![DerivedAttributes::default(); 2]).unwrap();
        assert_eq!(graph_stats(&g).family(NodeFamily::Author), 1);
    }

    #[test]
    fn multi_school_author_gets_one_edge_per_school() {
        let records = vec![rec("a", "X", "S1", ""), rec("b", "X", "S2", ""), rec("c", "X", "S1", "")];
        let g = build_graph(&records, &vec![DerivedAttributes::default(); 3]).unwrap();
        let author = g.id_of(&NodeRef::new(NodeFamily::Author, "x")).unwrap();
        // 3 paintings + 2 schools
        assert_eq!(g.degree(author), 5);
    }

    #[test]
    fn structure_checker_rejects_painting_school_edge() {
        let g = KnowledgeGraph::from_parts(
            [NodeRef::painting("p"), NodeRef::new(NodeFamily::School, "s")],
            [(NodeRef::painting("p"), NodeRef::new(NodeFamily::School, "s"))],
        )
        .unwrap();
        assert!(check_structure(&g).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let g = fixture();
        let back = graph_from_text(&graph_to_text(&g)).unwrap();
        assert_eq!(back, g);

        assert_eq!(graph_from_text("").unwrap().node_count(), 0);
        assert_eq!(graph_from_text("#ARTCTXG1\n").unwrap().node_count(), 0);

        let err = graph_from_text("#node 0 painting p\n#edge 0 7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = graph_from_text("#node 0 painting p\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = graph_from_text("#node x painting p\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn keys_with_spaces_survive_text_format() {
        let g = KnowledgeGraph::from_parts(
            [NodeRef::painting("p 1"), NodeRef::new(NodeFamily::Keyword, "three graces")],
            [(NodeRef::painting("p 1"), NodeRef::new(NodeFamily::Keyword, "three graces"))],
        )
        .unwrap();
        assert_eq!(graph_from_text(&graph_to_text(&g)).unwrap(), g);
    }
}
