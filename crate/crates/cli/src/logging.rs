//! Log records go to stderr and, while a run is active, to its `run.log`.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::sync::{Mutex, Once};

static RUN_LOG: Mutex<Option<File>> = Mutex::new(None);
static INIT: Once = Once::new();

struct Tee;

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        if let Some(f) = RUN_LOG.lock().expect("run log lock").as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()?;
        if let Some(f) = RUN_LOG.lock().expect("run log lock").as_mut() {
            f.flush()?;
        }
        Ok(())
    }
}

/// Installs the logger once per process; level from `RUST_LOG`, default
/// `info`.
pub fn init() {
    INIT.call_once(|| {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
            .target(env_logger::Target::Pipe(Box::new(Tee)))
            .format_timestamp_millis()
            .try_init();
    });
}

/// Mirrors log records into `path` until the guard drops.
pub struct RunLog;

impl RunLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let f = File::create(path)?;
        *RUN_LOG.lock().expect("run log lock") = Some(f);
        Ok(RunLog)
    }
}

impl Drop for RunLog {
    fn drop(&mut self) {
        if let Some(mut f) = RUN_LOG.lock().expect("run log lock").take() {
            let _ = f.flush();
        }
    }
}
