use std::io;
use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread;

use sha2::{Digest, Sha256};

use crate::config::NegotiationConfig;
use crate::session::{run_victim, SessionOptions, SessionReport};

/// Per-session seed so that concurrent seeded sessions draw distinct shares.
pub fn session_seed(seed: &[u8; 32], index: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed);
    h.update((index as u64).to_le_bytes());
    h.finalize().into()
}

/// Accepts connections and runs one victim session per connection on its
/// own thread. Stops accepting after `limit` sessions, if given, and
/// returns once those sessions have finished.
pub fn serve<F>(
    listener: TcpListener,
    config: Arc<NegotiationConfig>,
    options: SessionOptions,
    limit: Option<usize>,
    on_done: F,
) -> io::Result<()>
where
    F: Fn(usize, SocketAddr, SessionReport) + Send + Sync + 'static,
{
    let on_done = Arc::new(on_done);
    let mut handles = Vec::new();
    let mut index = 0usize;
    while limit.is_none_or(|l| index < l) {
        let (mut stream, peer) = match listener.accept() {
            Ok(conn) => conn,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        let config = Arc::clone(&config);
        let on_done = Arc::clone(&on_done);
        let mut options = options.clone();
        options.seed = options.seed.map(|s| session_seed(&s, index));
        let id = index;
        handles.push(thread::spawn(move || {
            let report = run_victim(&mut stream, &config, &options);
            on_done(id, peer, report);
        }));
        index += 1;
        handles.retain(|h| !h.is_finished());
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}
