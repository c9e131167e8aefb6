//! Conditional decision-graph chatbot.
//!
//! Nodes show text and link onward either through labelled user choices or,
//! when a node offers no choices, through a default link. Nodes flagged as
//! checkpoints can be returned to later.
//!
//! Checkpoints form a stack. Returning moves to the most recent checkpoint;
//! returning again while standing on it pops it and moves to the next older
//! one. The oldest checkpoint is never popped.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DialogError {
    #[error("bad graph: {0}")]
    BadGraph(String),
    #[error("unknown choice: {0}")]
    UnknownChoice(String),
    #[error("choice required")]
    ChoiceRequired,
    #[error("session ended")]
    SessionEnded,
    #[error("no checkpoint")]
    NoCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub text: String,
    #[serde(default)]
    pub choices: Vec<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_target: Option<String>,
    #[serde(default)]
    pub is_checkpoint: bool,
}

impl Node {
    /// No choices and no default link.
    pub fn is_terminal(&self) -> bool {
        self.choices.is_empty() && self.default_target.is_none()
    }

    pub fn choice_labels(&self) -> Vec<&str> {
        self.choices.iter().map(|c| c.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct DialogGraph {
    nodes: BTreeMap<String, Node>,
    start: String,
}

#[derive(Deserialize)]
struct RawGraph {
    nodes: BTreeMap<String, Node>,
    start: String,
}

impl TryFrom<RawGraph> for DialogGraph {
    type Error = DialogError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        DialogGraph::new(raw.nodes, raw.start)
    }
}

impl DialogGraph {
    pub fn new(
        nodes: BTreeMap<String, Node>,
        start: impl Into<String>,
    ) -> Result<Self, DialogError> {
        let graph = Self {
            nodes,
            start: start.into(),
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn from_json(text: &str) -> Result<Self, DialogError> {
        serde_json::from_str(text).map_err(|e| DialogError::BadGraph(e.to_string()))
    }

    fn validate(&self) -> Result<(), DialogError> {
        let bad = |msg: String| Err(DialogError::BadGraph(msg));
        if !self.nodes.contains_key(&self.start) {
            return bad(format!("start node {:?} does not exist", self.start));
        }
        for (id, node) in &self.nodes {
            for c in &node.choices {
                if !self.nodes.contains_key(&c.target) {
                    return bad(format!(
                        "{id}: choice {:?} targets missing {:?}",
                        c.label, c.target
                    ));
                }
            }
            let mut labels: Vec<&str> = node.choice_labels();
            labels.sort_unstable();
            if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
                return bad(format!("{id}: duplicate choice label {:?}", w[0]));
            }
            if let Some(t) = &node.default_target {
                if !self.nodes.contains_key(t) {
                    return bad(format!("{id}: default targets missing {t:?}"));
                }
                if node.choices.is_empty() && t == id {
                    return bad(format!("{id}: self-looping default with no choices"));
                }
            }
        }
        Ok(())
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> &BTreeMap<String, Node> {
        &self.nodes
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }
}

/// How the session arrived at a transcript entry's node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Choice(String),
    Default,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Node the move was made from.
    pub node: String,
    pub via: Move,
}

#[derive(Debug, Clone)]
pub struct DialogSession {
    graph: Arc<DialogGraph>,
    current: String,
    checkpoints: Vec<String>,
    transcript: Vec<TranscriptEntry>,
}

impl DialogSession {
    pub fn start(graph: Arc<DialogGraph>) -> Self {
        let current = graph.start.clone();
        let mut session = Self {
            graph,
            current,
            checkpoints: Vec::new(),
            transcript: Vec::new(),
        };
        session.enter_checkpoint();
        session
    }

    pub fn graph(&self) -> &DialogGraph {
        &self.graph
    }

    pub fn current(&self) -> &str {
        &self.current
    }

    pub fn current_node(&self) -> &Node {
        &self.graph.nodes[&self.current]
    }

    pub fn checkpoints(&self) -> &[String] {
        &self.checkpoints
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn is_ended(&self) -> bool {
        self.current_node().is_terminal()
    }

    fn enter_checkpoint(&mut self) {
        let is_checkpoint = self.current_node().is_checkpoint;
        if is_checkpoint && self.checkpoints.last() != Some(&self.current) {
            self.checkpoints.push(self.current.clone());
        }
    }

    /// Follows the labelled choice, or the default link when `choice` is
    /// `None`.
    pub fn step(&mut self, choice: Option<&str>) -> Result<&Node, DialogError> {
        let node = self.current_node();
        if node.is_terminal() {
            return Err(DialogError::SessionEnded);
        }
        let (target, via) = match choice {
            Some(label) => {
                let c = node
                    .choices
                    .iter()
                    .find(|c| c.label == label)
                    .ok_or_else(|| DialogError::UnknownChoice(label.to_string()))?;
                (c.target.clone(), Move::Choice(label.to_string()))
            }
            None => {
                let t = node
                    .default_target
                    .clone()
                    .ok_or(DialogError::ChoiceRequired)?;
                (t, Move::Default)
            }
        };
        self.transcript.push(TranscriptEntry {
            node: std::mem::replace(&mut self.current, target),
            via,
        });
        self.enter_checkpoint();
        Ok(self.current_node())
    }

    pub fn return_to_checkpoint(&mut self) -> Result<&Node, DialogError> {
        let top = self.checkpoints.last().ok_or(DialogError::NoCheckpoint)?;
        let target = if *top == self.current && self.checkpoints.len() > 1 {
            self.checkpoints.pop();
            self.checkpoints
                .last()
                .cloned()
                .expect("len > 1 before pop")
        } else {
            top.clone()
        };
        self.transcript.push(TranscriptEntry {
            node: std::mem::replace(&mut self.current, target),
            via: Move::Return,
        });
        Ok(self.current_node())
    }
}

/// The bundled illustrative screening graph.
pub fn screening_graph() -> DialogGraph {
    DialogGraph::from_json(include_str!("../assets/screening_graph.json"))
        .expect("bundled graph is valid")
}
