use std::net::{IpAddr, SocketAddr};

use serde_json::json;

use agenda_service::{app, serve_blocking, Backends, ServiceConfig};

use super::{descriptor, ensure_dir};
use crate::args::ServeArgs;
use crate::{CliError, CliResult, Ctx};

pub fn serve(a: &ServeArgs, ctx: &mut Ctx) -> CliResult {
    let ip: IpAddr = a
        .host
        .parse()
        .map_err(|e| CliError::Usage(format!("host `{}`: {e}", a.host)))?;
    let addr = SocketAddr::new(ip, a.port);
    let mut backends = Backends::default();
    if let Some(b) = &a.backend {
        let d = descriptor(b)?;
        backends.scorer = Some(d.build_scorer()?);
        backends.embedder = Some(d.build_embedder()?);
        backends.translator = match d.build_translator() {
            Ok(t) => Some(t),
            Err(e) => {
                log::warn!("no translator: {e}");
                None
            }
        };
    }
    if ctx.dry_run() {
        return ctx.summary(json!({ "dry_run": true, "addr": addr.to_string(), "backend": a.backend }));
    }
    ensure_dir(ctx, &a.data_dir)?;
    let mut cfg = ServiceConfig::new(&a.data_dir, ctx.schema.clone());
    cfg.backends = backends;
    cfg.corpus_files = a.corpus.clone();
    cfg.cors = a.cors;
    let router = app(cfg)?;
    log::info!("serving {} on {addr}", a.data_dir.display());
    serve_blocking(addr, router).map_err(|e| {
        CliError::Core(agenda_core::Error::Io { path: addr.to_string().into(), source: e })
    })
}
