//! The `compovm` command line: `run`, `types` and `shell`.

mod run;
mod shell;
mod types;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use compovm_core::{kit, TypeLoader};

use crate::source::FileSource;

pub use run::{run_scene, run_script};
pub use shell::Shell;

/// Exit code for failed `expect` lines.
pub const EXIT_EXPECT: i32 = 1;
/// Exit code for parse, type and usage errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "compovm", version, about = "Compose, inspect and run component types")]
pub struct Cli {
    /// Directory searched for `.cvm` type files; repeatable, searched
    /// before COMPOVM_TYPE_PATH.
    #[arg(long = "type-path", value_name = "DIR", global = true)]
    pub type_path: Vec<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Instantiate the scene among FILES and apply a stimulus script.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Lines of `set PATH LIT`, `expect PATH LIT`, `trace PATH`, `pump`.
        #[arg(long, value_name = "FILE")]
        script: Option<PathBuf>,
    },
    /// Inspect registered and type-path types.
    #[command(subcommand)]
    Types(TypesCommand),
    /// Build prototypes interactively.
    Shell,
}

#[derive(Debug, Subcommand)]
pub enum TypesCommand {
    List,
    Show { name: String },
}

/// A loader with the standard kit and the type path installed.
pub fn loader(source: FileSource) -> Arc<TypeLoader> {
    let loader = TypeLoader::new();
    kit::register(&loader).expect("kit registers into a fresh loader");
    loader.add_source(Arc::new(source));
    loader
}

fn read(path: &Path, err: &mut dyn Write) -> Option<String> {
    match std::fs::read_to_string(path) {
        Ok(text) => Some(text),
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", path.display());
            None
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let source = FileSource::from_env(&cli.type_path);
    match cli.command {
        Command::Run { files, script } => {
            let script = match &script {
                Some(path) => match read(path, err) {
                    Some(text) => Some(text),
                    None => return EXIT_ERROR,
                },
                None => None,
            };
            let mut texts = Vec::new();
            for file in &files {
                match read(file, err) {
                    Some(text) => texts.push((file.display().to_string(), text)),
                    None => return EXIT_ERROR,
                }
            }
            run_scene(&loader(source), &texts, script.as_deref(), out, err)
        }
        Command::Types(TypesCommand::List) => types::list(&source, out, err),
        Command::Types(TypesCommand::Show { name }) => types::show(&loader(source), &name, out, err),
        Command::Shell => {
            let interactive = std::io::IsTerminal::is_terminal(&std::io::stdin());
            Shell::new(loader(source)).run(input, out, err, interactive)
        }
    }
}
