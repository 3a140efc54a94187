//! Minimal stderr logging controlled by `ROMBO_LOG` (off | error | info |
//! debug). Defaults to `error`.

use std::sync::OnceLock;

#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub enum Level {
    Off = 0,
    Error = 1,
    Info = 2,
    Debug = 3,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

pub fn init_from_env() {
    let level = match std::env::var("ROMBO_LOG").as_deref() {
        Ok("off") => Level::Off,
        Ok("info") => Level::Info,
        Ok("debug") => Level::Debug,
        _ => Level::Error,
    };
    let _ = LEVEL.set(level);
}

fn level() -> Level {
    *LEVEL.get_or_init(|| Level::Error)
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[rombo] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("[rombo:debug] {}", msg.as_ref());
    }
}
