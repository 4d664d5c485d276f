//! View-Hierarchy tree, its JSON form, and the leaf-node baseline.
//!
//! Node JSON: `{"class", "bounds": [x1,y1,x2,y2], "clickable", "text"?, "children": [...]}`;
//! document: `{"screen_id", "width", "height", "root"}`.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::BBox;

#[derive(Clone, Debug, PartialEq)]
pub struct ViewNode {
    pub class_name: String,
    pub bounds: BBox,
    pub text: Option<String>,
    pub clickable: bool,
    /// Class names from the root down to (excluding) this node.
    pub ancestors: Vec<String>,
    pub children: Vec<ViewNode>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewHierarchy {
    pub screen_id: String,
    pub screen_width: u32,
    pub screen_height: u32,
    pub root: ViewNode,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Nodes removed because of inverted bounds, counting their subtrees.
    pub dropped_nodes: usize,
}

#[derive(Debug, Error)]
pub enum VhError {
    #[error("malformed view hierarchy: {0}")]
    MalformedDocument(String),
    #[error("view hierarchy root was dropped (invalid bounds)")]
    EmptyHierarchy,
}

impl ViewNode {
    /// A node with no children, text or ancestors.
    pub fn leaf(class_name: impl Into<String>, bounds: BBox) -> Self {
        Self {
            class_name: class_name.into(),
            bounds,
            text: None,
            clickable: false,
            ancestors: Vec::new(),
            children: Vec::new(),
        }
    }

    /// Recomputes `ancestors` for this subtree given the ancestors of `self`.
    pub fn relink(&mut self, ancestors: Vec<String>) {
        let mut child_anc = ancestors.clone();
        child_anc.push(self.class_name.clone());
        self.ancestors = ancestors;
        for c in &mut self.children {
            c.relink(child_anc.clone());
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Depth-first pre-order traversal.
    pub fn preorder(&self) -> Vec<&ViewNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.ancestors.len()
    }
}

impl ViewHierarchy {
    pub fn nodes(&self) -> Vec<&ViewNode> {
        self.root.preorder()
    }

    pub fn screen_box(&self) -> BBox {
        BBox::new(0.0, 0.0, f64::from(self.screen_width), f64::from(self.screen_height))
    }
}

fn malformed(msg: impl Into<String>) -> VhError {
    VhError::MalformedDocument(msg.into())
}

fn parse_node(
    v: &Value,
    ancestors: &[String],
    width: f64,
    height: f64,
    report: &mut ParseReport,
) -> Result<Option<ViewNode>, VhError> {
    let obj = v.as_object().ok_or_else(|| malformed("node is not an object"))?;
    let class_name = obj
        .get("class")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("node without string `class`"))?
        .to_string();
    let raw = obj
        .get("bounds")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 4)
        .ok_or_else(|| malformed(format!("node `{class_name}` needs 4-element `bounds`")))?;
    let mut b = [0.0; 4];
    for (slot, x) in b.iter_mut().zip(raw) {
        *slot = x
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| malformed(format!("non-numeric bounds in `{class_name}`")))?;
    }
    let Ok(bounds) = BBox::from_array(b) else {
        report.dropped_nodes += 1 + count_subtree(obj.get("children"));
        return Ok(None);
    };
    let bounds = bounds.clamp_to(width, height);
    let clickable = obj.get("clickable").and_then(Value::as_bool).unwrap_or(false);
    let text = obj.get("text").and_then(Value::as_str).map(str::to_string);

    let mut child_anc = ancestors.to_vec();
    child_anc.push(class_name.clone());
    let mut children = Vec::new();
    if let Some(cs) = obj.get("children") {
        let cs = match cs {
            Value::Array(a) => a.as_slice(),
            Value::Null => &[],
            _ => return Err(malformed(format!("`children` of `{class_name}` is not an array"))),
        };
        for c in cs.iter().filter(|c| !c.is_null()) {
            if let Some(n) = parse_node(c, &child_anc, width, height, report)? {
                children.push(n);
            }
        }
    }
    Ok(Some(ViewNode {
        class_name,
        bounds,
        text,
        clickable,
        ancestors: ancestors.to_vec(),
        children,
    }))
}

fn count_subtree(children: Option<&Value>) -> usize {
    children
        .and_then(Value::as_array)
        .map(|cs| {
            cs.iter()
                .filter(|c| !c.is_null())
                .map(|c| 1 + count_subtree(c.get("children")))
                .sum()
        })
        .unwrap_or(0)
}

/// Parses a VH document, clamping bounds to the screen and dropping
/// inverted-bounds nodes with their subtrees.
pub fn parse_vh(document: &str) -> Result<(ViewHierarchy, ParseReport), VhError> {
    let doc: Value = serde_json::from_str(document).map_err(|e| malformed(e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| malformed("document is not an object"))?;
    let dim = |k: &str| -> Result<u32, VhError> {
        obj.get(k)
            .and_then(Value::as_u64)
            .and_then(|v| u32::try_from(v).ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| malformed(format!("missing positive integer `{k}`")))
    };
    let (w, h) = (dim("width")?, dim("height")?);
    let screen_id = obj
        .get("screen_id")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing `screen_id`"))?
        .to_string();
    let root = obj.get("root").ok_or_else(|| malformed("missing `root`"))?;
    build(screen_id, w, h, root)
}

/// Parses a RICO-native file (`{"activity": {"root": ...}}`), whose bounds are
/// in the 1440x2560 capture space and which carries no screen id.
pub fn parse_rico_vh(document: &str, screen_id: &str) -> Result<(ViewHierarchy, ParseReport), VhError> {
    let doc: Value = serde_json::from_str(document).map_err(|e| malformed(e.to_string()))?;
    let root = doc
        .pointer("/activity/root")
        .ok_or_else(|| malformed("missing `activity.root`"))?;
    build(screen_id.to_string(), 1440, 2560, root)
}

fn build(screen_id: String, w: u32, h: u32, root: &Value) -> Result<(ViewHierarchy, ParseReport), VhError> {
    let mut report = ParseReport::default();
    let root = parse_node(root, &[], f64::from(w), f64::from(h), &mut report)?.ok_or(VhError::EmptyHierarchy)?;
    Ok((
        ViewHierarchy {
            screen_id,
            screen_width: w,
            screen_height: h,
            root,
        },
        report,
    ))
}

fn node_json(n: &ViewNode) -> Value {
    let mut m = Map::new();
    m.insert("class".into(), json!(n.class_name));
    m.insert("bounds".into(), json!(n.bounds.to_array()));
    m.insert("clickable".into(), json!(n.clickable));
    if let Some(t) = &n.text {
        m.insert("text".into(), json!(t));
    }
    m.insert("children".into(), Value::Array(n.children.iter().map(node_json).collect()));
    Value::Object(m)
}

pub fn serialize_vh(vh: &ViewHierarchy) -> String {
    json!({
        "screen_id": vh.screen_id,
        "width": vh.screen_width,
        "height": vh.screen_height,
        "root": node_json(&vh.root),
    })
    .to_string()
}

/// Childless nodes at least `min_side` on both sides with aspect ratio at most `max_aspect`, in pre-order.
pub fn leaf_nodes(vh: &ViewHierarchy, min_side: f64, max_aspect: f64) -> Vec<&ViewNode> {
    vh.nodes()
        .into_iter()
        .filter(|n| {
            let (w, h) = (n.bounds.width(), n.bounds.height());
            n.is_leaf() && w >= min_side && h >= min_side && (w / h).max(h / w) <= max_aspect
        })
        .collect()
}

pub const DEFAULT_LEAF_MIN_SIDE: f64 = 8.0;
pub const DEFAULT_LEAF_MAX_ASPECT: f64 = 20.0;
