//! The `.cvm` text format: composed type definitions and scenes.
//!
//! ```text
//! type demo.Doubler {
//!   interface { [RWB] Int32 x = 0  [RB] Int32 y = 0 }
//!   impl { DEF add std.Adder { a: USE x  b: USE x  sum: USE y } }
//! }
//! ```
//!
//! `USE` of an interface property shares it; `USE` of a DEF name uses that
//! instance as the property value.

mod lexer;
mod parser;
mod writer;

use compovm_core::Error;

pub use lexer::Pos;
pub use parser::{parse, parse_literal, ParsedFile, SCENE_NAME};
pub use writer::{write_file, write_scene, write_type};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("{}:{}: syntax error: {message}", .pos.line, .pos.col)]
    Syntax { pos: Pos, message: String },
    #[error("{}:{}: {source}", .pos.line, .pos.col)]
    Semantic {
        pos: Pos,
        #[source]
        source: Error,
    },
}

impl TextError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> TextError {
        TextError::Syntax { pos, message: message.into() }
    }

    /// 1-based location of the offending token.
    pub fn pos(&self) -> Pos {
        match self {
            TextError::Syntax { pos, .. } | TextError::Semantic { pos, .. } => *pos,
        }
    }

    /// The model error behind a semantic failure.
    pub fn model_error(&self) -> Option<&Error> {
        match self {
            TextError::Semantic { source, .. } => Some(source),
            TextError::Syntax { .. } => None,
        }
    }
}
