// SPDX-License-Identifier: Apache-2.0

//! Adversary action scripts.
//!
//! A script is an ordered list of wire actions, one per line in the text
//! form. `#` starts a comment.
//!
//! ```text
//! deliver                    # deliver the oldest in-flight message
//! drop 2                     # drop the oldest two messages
//! flip 0 12 3                # flip bit 3 of byte 12 of in-flight msg 0
//! inject 0102ab              # enqueue raw bytes toward the responder
//! reveal_ltk at 1000         # hand the adversary the long-term key at t
//! ```
//!
//! Built-in scenarios assemble their scripts programmatically (injected
//! bytes depend on per-trial randomness); the text form is the interchange
//! format, and every action round-trips through it.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScriptError {
    #[error("script line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("action `{action}` failed: {reason}")]
    Runtime { action: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Deliver the oldest in-flight message to its destination.
    Deliver,
    /// Drop the oldest `n` in-flight messages.
    Drop(u32),
    /// Flip one bit of an in-flight message.
    Flip {
        msg_idx: usize,
        byte_idx: usize,
        bit: u8,
    },
    /// Enqueue raw bytes addressed to the responder endpoint.
    Inject(Vec<u8>),
    /// Grant the adversary the long-term key at simulated time `at`.
    RevealLtk { at: u64 },
}

impl Action {
    pub fn to_text(&self) -> String {
        match self {
            Action::Deliver => "deliver".into(),
            Action::Drop(n) => format!("drop {n}"),
            Action::Flip {
                msg_idx,
                byte_idx,
                bit,
            } => format!("flip {msg_idx} {byte_idx} {bit}"),
            Action::Inject(bytes) => format!("inject {}", hex::encode(bytes)),
            Action::RevealLtk { at } => format!("reveal_ltk at {at}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    actions: Vec<Action>,
}

impl Script {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn push(&mut self, action: Action) {
        self.actions.push(action);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for action in &self.actions {
            out.push_str(&action.to_text());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut actions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let mut words = stripped.split_whitespace();
            let verb = words.next().expect("non-empty line");
            let mut arg = |name: &str| {
                words.next().ok_or_else(|| ScriptError::Parse {
                    line,
                    reason: format!("missing argument <{name}>"),
                })
            };
            let action = match verb {
                "deliver" => Action::Deliver,
                "drop" => {
                    let n = arg("n")?;
                    Action::Drop(n.parse().map_err(|_| ScriptError::Parse {
                        line,
                        reason: format!("`{n}` is not a count"),
                    })?)
                }
                "flip" => {
                    let msg_idx = parse_num(arg("msg_idx")?, line)?;
                    let byte_idx = parse_num(arg("byte_idx")?, line)?;
                    let bit: u8 = parse_num(arg("bit")?, line)?;
                    if bit > 7 {
                        return Err(ScriptError::Parse {
                            line,
                            reason: format!("bit index {bit} out of range 0..7"),
                        });
                    }
                    Action::Flip {
                        msg_idx,
                        byte_idx,
                        bit,
                    }
                }
                "inject" => {
                    let raw = arg("hex")?;
                    Action::Inject(hex::decode(raw).map_err(|_| ScriptError::Parse {
                        line,
                        reason: format!("`{raw}` is not hex"),
                    })?)
                }
                "reveal_ltk" => {
                    let kw = arg("at")?;
                    if kw != "at" {
                        return Err(ScriptError::Parse {
                            line,
                            reason: "expected `reveal_ltk at <t>`".into(),
                        });
                    }
                    Action::RevealLtk {
                        at: parse_num(arg("t")?, line)?,
                    }
                }
                other => {
                    return Err(ScriptError::Parse {
                        line,
                        reason: format!("unknown action `{other}`"),
                    })
                }
            };
            if let Some(extra) = words.next() {
                return Err(ScriptError::Parse {
                    line,
                    reason: format!("unexpected trailing argument `{extra}`"),
                });
            }
            actions.push(action);
        }
        Ok(Self { actions })
    }
}

fn parse_num<T: std::str::FromStr>(raw: &str, line: usize) -> Result<T, ScriptError> {
    raw.parse().map_err(|_| ScriptError::Parse {
        line,
        reason: format!("`{raw}` is not a number"),
    })
}
