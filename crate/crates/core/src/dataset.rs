//! Labelled tree collections and their JSON-lines representation.
//!
//! One record per line:
//!
//! ```text
//! {"id": str, "label": str, "nodes": [{"id": str, "parent": str|null,
//!   "size": number|null, "leaf_values": [number]|null, "features": [number]|null}]}
//! ```

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureMode, FeatureSpec};
use crate::tree::{compute_rel_sizes, validate_tree, Node, Rule, SizeMode, Tree, Violation};

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub label: String,
    pub tree: Tree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<Item>,
    /// Sorted label alphabet.
    pub labels: Vec<String>,
    /// `None` until features have been extracted or supplied.
    pub feature_spec: Option<FeatureSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeRecord {
    id: String,
    label: String,
    nodes: Vec<NodeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    parent: Option<String>,
    #[serde(default)]
    size: Option<f64>,
    #[serde(default)]
    leaf_values: Option<Vec<f64>>,
    #[serde(default)]
    features: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset, deriving the label alphabet and checking feature consistency.
    pub fn new(items: Vec<Item>) -> Result<Dataset> {
        let labels: Vec<String> = items
            .iter()
            .map(|i| i.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let with_features = items
            .iter()
            .all(|i| i.tree.nodes.iter().all(|n| n.features.is_some()));
        let feature_spec = if with_features && !items.is_empty() {
            let dims = items[0].tree.nodes[0].features.as_ref().map_or(0, Vec::len);
            for item in &items {
                for node in &item.tree.nodes {
                    let d = node.features.as_ref().map_or(0, Vec::len);
                    if d != dims {
                        return Err(Error::Validation {
                            tree: item.id.clone(),
                            violations: vec![Violation::new(Rule::FeatureDims, Some(&node.id))],
                        });
                    }
                }
            }
            Some(FeatureSpec {
                mode: FeatureMode::Provided,
                dims,
            })
        } else {
            None
        };
        Ok(Dataset {
            items,
            labels,
            feature_spec,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Label of every item as an index into `labels`.
    pub fn class_indices(&self) -> Vec<usize> {
        self.items
            .iter()
            .map(|i| self.label_index(&i.label).expect("label in alphabet"))
            .collect()
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }

    /// Returns a copy with node features computed under `mode`.
    pub fn with_features(&self, mode: &FeatureMode) -> Result<Dataset> {
        if let FeatureMode::Provided = mode {
            return match &self.feature_spec {
                Some(_) => Ok(self.clone()),
                None => Err(Error::Features("dataset carries no features".into())),
            };
        }
        let mut items = Vec::with_capacity(self.items.len());
        let mut dims = None;
        for item in &self.items {
            let tree = extract_features(&item.tree, mode).map_err(|e| Error::Item {
                item: item.id.clone(),
                source: Box::new(e),
            })?;
            let d = tree.nodes[tree.root].features.as_ref().map_or(0, Vec::len);
            if *dims.get_or_insert(d) != d {
                return Err(Error::DimensionMismatch {
                    left: dims.unwrap(),
                    right: d,
                });
            }
            items.push(Item {
                id: item.id.clone(),
                label: item.label.clone(),
                tree,
            });
        }
        Ok(Dataset {
            items,
            labels: self.labels.clone(),
            feature_spec: Some(FeatureSpec {
                mode: mode.clone(),
                dims: dims.unwrap_or(0),
            }),
        })
    }

    /// Writes one JSON record per tree.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for item in &self.items {
            let nodes = item
                .tree
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.clone(),
                    parent: n.parent.map(|p| item.tree.nodes[p].id.clone()),
                    size: n.size,
                    leaf_values: n.leaf_values.clone(),
                    features: n.features.clone(),
                })
                .collect();
            let rec = TreeRecord {
                id: item.id.clone(),
                label: item.label.clone(),
                nodes,
            };
            serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let f = std::fs::File::open(path)?;
        parse_dataset(std::io::BufReader::new(f))
    }
}

/// Reads and validates a JSON-lines dataset. Blank lines are skipped.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TreeRecord =
            serde_json::from_str(&line).map_err(|source| Error::Parse { line: i + 1, source })?;
        let tree = tree_from_record(&rec).map_err(|violations| Error::Validation {
            tree: rec.id.clone(),
            violations,
        })?;
        items.push(Item {
            id: rec.id,
            label: rec.label,
            tree,
        });
    }
    Dataset::new(items)
}

fn tree_from_record(rec: &TreeRecord) -> std::result::Result<Tree, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut index = HashMap::with_capacity(rec.nodes.len());
    for (i, n) in rec.nodes.iter().enumerate() {
        if index.insert(n.id.as_str(), i).is_some() {
            violations.push(Violation::new(Rule::DuplicateId, Some(&n.id)));
        }
    }
    let mut nodes = Vec::with_capacity(rec.nodes.len());
    for n in &rec.nodes {
        let parent = match &n.parent {
            None => None,
            Some(p) => match index.get(p.as_str()) {
                Some(&pi) => Some(pi),
                None => {
                    violations.push(Violation::new(Rule::UnknownNode, Some(&n.id)));
                    None
                }
            },
        };
        let mut node = Node::new(n.id.clone(), parent);
        node.size = n.size;
        node.leaf_values = n.leaf_values.clone();
        node.features = n.features.clone();
        nodes.push(node);
    }
    if !violations.is_empty() {
        return Err(violations);
    }

    let tree = Tree::from_parent_links(nodes)?;

    let sized = tree.nodes.iter().filter(|n| n.size.is_some()).count();
    let mode = if sized == tree.len() {
        SizeMode::Pixel
    } else if sized == 0 {
        SizeMode::LeafCount
    } else {
        return Err(vec![Violation::new(Rule::PartialSizes, None)]);
    };
    let tree = compute_rel_sizes(&tree, mode)
        .map_err(|_| vec![Violation::new(Rule::RelSizeOutOfRange, Some(&tree.root_node().id))])?;

    let all_features = tree.nodes.iter().all(|n| n.features.is_some());
    if !all_features {
        for n in tree.nodes.iter().filter(|n| n.is_leaf() && n.leaf_values.is_none()) {
            violations.push(Violation::new(Rule::MissingPayload, Some(&n.id)));
        }
    }
    violations.extend(validate_tree(&tree));
    if violations.is_empty() {
        Ok(tree)
    } else {
        Err(violations)
    }
}
