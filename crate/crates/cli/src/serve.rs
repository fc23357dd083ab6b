use vforge_net::annotation::{read_tasks, AnnotationStore};
use vforge_net::server::{port_from_env, start, Service};

use crate::{data, CliError, ServeArgs};

/// Open the queue and its journal, register the listed annotators.
pub fn open_store(args: &ServeArgs) -> Result<AnnotationStore, CliError> {
    let tasks = read_tasks(&args.tasks)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.tasks.display())))?;
    let mut store = AnnotationStore::open(tasks, &args.journal)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.journal.display())))?;
    for annotator in args
        .annotators
        .iter()
        .map(|a| a.trim())
        .filter(|a| !a.is_empty())
    {
        store.register(annotator).map_err(data)?;
    }
    Ok(store)
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let store = open_store(args)?;
    let stats = store.state().stats();
    let service = Service::new(store, args.static_dir.clone());
    let addr = format!("{}:{}", args.host, args.port.unwrap_or_else(port_from_env));
    let server =
        start(service, &addr, args.workers).map_err(|e| CliError::External(e.to_string()))?;
    eprintln!(
        "serving {} tasks ({} complete) to {} annotators on {}",
        stats.tasks,
        stats.completed_tasks,
        stats.annotators,
        server.url()
    );
    server.wait();
    Ok(())
}
