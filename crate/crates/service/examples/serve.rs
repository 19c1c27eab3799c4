//! Run the session service.
//!
//! ```text
//! cargo run --release -p wdc-service --example serve -- 127.0.0.1:8080 [PERSIST_DIR]
//! ```

use std::sync::Arc;
use std::time::Duration;

use wdc_service::{router, ServiceConfig, SessionStore};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8080".into());
    let config = ServiceConfig {
        persist_dir: args.next().map(Into::into),
        ..Default::default()
    };
    if let Some(dir) = &config.persist_dir {
        std::fs::create_dir_all(dir)?;
    }

    let store = Arc::new(SessionStore::new(config));
    store.spawn_evictor(Duration::from_secs(60));
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
