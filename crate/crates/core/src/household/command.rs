//! Atomic action commands: `<char{N}> [{verb}] <{class}> ({id})`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Walk,
    Grab,
    Open,
    Close,
    SwitchOn,
    SwitchOff,
    Sit,
    StandUp,
    PutBack,
    Lie,
}

impl Verb {
    pub const ALL: [Verb; 10] = [
        Verb::Walk,
        Verb::Grab,
        Verb::Open,
        Verb::Close,
        Verb::SwitchOn,
        Verb::SwitchOff,
        Verb::Sit,
        Verb::StandUp,
        Verb::PutBack,
        Verb::Lie,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Walk => "walk",
            Verb::Grab => "grab",
            Verb::Open => "open",
            Verb::Close => "close",
            Verb::SwitchOn => "switchon",
            Verb::SwitchOff => "switchoff",
            Verb::Sit => "sit",
            Verb::StandUp => "standup",
            Verb::PutBack => "putback",
            Verb::Lie => "lie",
        }
    }

    /// Verbs that toggle an item state.
    pub fn changes_state(self) -> bool {
        matches!(
            self,
            Verb::Open | Verb::Close | Verb::SwitchOn | Verb::SwitchOff
        )
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown verb {0:?}")]
pub struct UnknownVerb(pub String);

impl FromStr for Verb {
    type Err = UnknownVerb;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Verb::ALL
            .into_iter()
            .find(|v| v.as_str() == lower)
            .ok_or_else(|| UnknownVerb(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("command syntax error at byte {position}: {message}")]
pub struct CommandSyntaxError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ActionCommand {
    pub agent_index: u32,
    pub verb: Verb,
    pub item_class: String,
    pub item_id: u32,
}

impl ActionCommand {
    pub fn new(agent_index: u32, verb: Verb, item_class: impl Into<String>, item_id: u32) -> Self {
        Self {
            agent_index,
            verb,
            item_class: item_class.into(),
            item_id,
        }
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ActionCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<char{}> [{}] <{}> ({})",
            self.agent_index, self.verb, self.item_class, self.item_id
        )
    }
}

impl From<ActionCommand> for String {
    fn from(cmd: ActionCommand) -> Self {
        cmd.to_string()
    }
}

impl TryFrom<String> for ActionCommand {
    type Error = CommandSyntaxError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_command(&s)
    }
}

impl FromStr for ActionCommand {
    type Err = CommandSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_command(s)
    }
}

pub fn is_class_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> CommandSyntaxError {
        CommandSyntaxError {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn expect(&mut self, c: char) -> Result<(), CommandSyntaxError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected {c:?}")))
        }
    }

    fn take_while(
        &mut self,
        what: &str,
        pred: impl Fn(char) -> bool,
    ) -> Result<&'a str, CommandSyntaxError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest.find(|c: char| !pred(c)).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error(format!("expected {what}")));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn number(&mut self) -> Result<u32, CommandSyntaxError> {
        let start = self.pos;
        let digits = self.take_while("a number", |c| c.is_ascii_digit())?;
        digits.parse().map_err(|_| CommandSyntaxError {
            position: start,
            message: format!("number {digits} out of range"),
        })
    }
}

/// Parses one command. Whitespace around every token is ignored.
pub fn parse_command(text: &str) -> Result<ActionCommand, CommandSyntaxError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.expect('<')?;
    cur.skip_ws();
    if !cur.text[cur.pos..].starts_with("char") {
        return Err(cur.error("expected \"char\""));
    }
    cur.pos += "char".len();
    let agent_index = cur.number()?;
    cur.expect('>')?;
    cur.expect('[')?;
    cur.skip_ws();
    let verb_pos = cur.pos;
    let verb_text = cur.take_while("a verb", |c| c.is_ascii_alphabetic())?;
    let verb = verb_text.parse::<Verb>().map_err(|e| CommandSyntaxError {
        position: verb_pos,
        message: e.to_string(),
    })?;
    cur.expect(']')?;
    cur.expect('<')?;
    let item_class = cur.take_while("an item class", is_class_char)?.to_string();
    cur.expect('>')?;
    cur.expect('(')?;
    let item_id = cur.number()?;
    cur.expect(')')?;
    cur.skip_ws();
    if cur.pos != text.len() {
        return Err(cur.error("trailing input"));
    }
    Ok(ActionCommand {
        agent_index,
        verb,
        item_class,
        item_id,
    })
}
