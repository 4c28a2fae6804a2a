//! Log records go to stderr and, while a run is active on the current
//! thread, to that run's `log.txt`.

use std::cell::RefCell;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

thread_local! {
    static RUN_LOG: RefCell<Option<File>> = const { RefCell::new(None) };
}

struct Tee;

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        RUN_LOG.with(|f| {
            if let Some(file) = f.borrow_mut().as_mut() {
                let _ = file.write_all(buf);
            }
        });
        io::stderr().write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()
    }
}

/// Default level `info`; `RUST_LOG` overrides.
pub fn init(verbose: bool) {
    let level = if verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Pipe(Box::new(Tee)))
        .try_init();
}

/// Copies this thread's log records into `path` until the guard drops.
pub fn capture(path: &Path) -> io::Result<CaptureGuard> {
    let file = File::create(path)?;
    RUN_LOG.with(|f| *f.borrow_mut() = Some(file));
    Ok(CaptureGuard)
}

pub struct CaptureGuard;

impl Drop for CaptureGuard {
    fn drop(&mut self) {
        RUN_LOG.with(|f| *f.borrow_mut() = None);
    }
}
