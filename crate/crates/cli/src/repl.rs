//! Line-oriented dialog walk. Each prompt shows the node text and its
//! numbered choices. Input is a choice number or label, an empty line for
//! the default link, `back` to return to a checkpoint, or `quit`.

use std::io::{BufRead, Write};

use anyhow::Result;
use vitalcam_core::dialog::{DialogError, DialogSession, Node};

/// How a walk ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Reached a terminal node.
    Ended(String),
    /// The user typed `quit`.
    Quit(String),
    /// Input ran out first.
    Eof(String),
}

fn show(out: &mut impl Write, node: &Node) -> std::io::Result<()> {
    writeln!(out, "{}", node.text)?;
    for (i, c) in node.choices.iter().enumerate() {
        writeln!(out, "  {}) {}", i + 1, c.label)?;
    }
    if node.default_target.is_some() {
        writeln!(out, "  [enter] continue")?;
    }
    Ok(())
}

pub fn run(
    session: &mut DialogSession,
    input: impl BufRead,
    mut out: impl Write,
) -> Result<Outcome> {
    show(&mut out, session.current_node())?;
    let mut lines = input.lines();
    loop {
        if session.is_ended() {
            return Ok(Outcome::Ended(session.current().to_string()));
        }
        write!(out, "> ")?;
        out.flush()?;
        let Some(line) = lines.next() else {
            writeln!(out)?;
            return Ok(Outcome::Eof(session.current().to_string()));
        };
        let line = line?;
        let line = line.trim();
        let result = match line {
            "quit" | "exit" => return Ok(Outcome::Quit(session.current().to_string())),
            "back" => session.return_to_checkpoint().map(|_| ()),
            "" => session.step(None).map(|_| ()),
            other => {
                let node = session.current_node();
                let label = other
                    .parse::<usize>()
                    .ok()
                    .and_then(|n| n.checked_sub(1))
                    .and_then(|i| node.choices.get(i))
                    .map_or_else(|| other.to_string(), |c| c.label.clone());
                session.step(Some(&label)).map(|_| ())
            }
        };
        match result {
            Ok(()) => show(&mut out, session.current_node())?,
            Err(DialogError::ChoiceRequired) => writeln!(out, "please pick a choice")?,
            Err(e) => writeln!(out, "{e}")?,
        }
    }
}
