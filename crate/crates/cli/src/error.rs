use std::fmt::Debug;
use std::path::Path;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    /// A library error, tagged with the module that raised it.
    #[error("{context}: {message}")]
    Module {
        module: &'static str,
        kind: String,
        context: String,
        message: String,
    },
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        let v = match self {
            CliError::Usage(m) => json!({"error": "Usage", "message": m}),
            CliError::ConfigInvalid(m) => json!({"error": "ConfigInvalid", "message": m}),
            CliError::Io { path, message } => {
                json!({"error": "Io", "path": path, "message": message})
            }
            CliError::Module {
                module,
                kind,
                context,
                message,
            } => json!({
                "error": kind,
                "module": module,
                "context": context,
                "message": message,
            }),
        };
        v.to_string()
    }
}

/// Adapter for `map_err`: keeps the library error's variant name and message.
pub fn module<E: std::error::Error + Debug>(
    module: &'static str,
    context: impl Into<String>,
) -> impl FnOnce(E) -> CliError {
    let context = context.into();
    move |e| {
        let dbg = format!("{e:?}");
        let kind = dbg
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .next()
            .unwrap_or_default()
            .to_string();
        CliError::Module {
            module,
            kind,
            context,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Error)]
    enum Sample {
        #[error("bad thing {0}")]
        BadThing(u8),
        #[error("plain")]
        Plain,
        #[error("fields")]
        WithFields { a: u8 },
    }

    #[test]
    fn module_errors_carry_the_variant_name() {
        for (e, kind) in [
            (Sample::BadThing(3), "BadThing"),
            (Sample::Plain, "Plain"),
            (Sample::WithFields { a: 1 }, "WithFields"),
        ] {
            let CliError::Module {
                kind: k, module: m, ..
            } = module("m", "ctx")(e)
            else {
                panic!("not a module error");
            };
            assert_eq!((k.as_str(), m), (kind, "m"));
        }
        let json: serde_json::Value =
            serde_json::from_str(&CliError::ConfigInvalid("x".into()).to_json()).unwrap();
        assert_eq!(json["error"], "ConfigInvalid");
    }
}
