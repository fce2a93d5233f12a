//! Runs a small blinded study end to end over HTTP: a local server, a
//! synthetic corpus with known injected errors, and two scripted raters.
//!
//!     cargo run -p crb-service --example simulated_study

use crb_core::model::{RaterRole, StudyConfig};
use crb_core::parser::EntityLexicon;
use crb_service::simulate::{self, OracleRater, Scenario};
use crb_service::{AppState, BackgroundServer, Client};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = BackgroundServer::start(AppState::in_memory(1))?;
    let client = Client::new(server.url(""));
    println!("serving on {}", server.addr);

    let scenario = Scenario::synthetic(StudyConfig::ai_versus_manual("demo", 42), 20, 42, &EntityLexicon::builtin())?;
    simulate::load(&client, &scenario)?;

    let task = {
        client.register_rater("demo", "peek", RaterRole::Clinician)?;
        client.next_task("demo", "peek")?.expect("a task")
    };
    println!("first task {} shows {} blinded candidates:", task.task_id, task.presented.len());
    for c in &task.presented {
        println!("  {}: {}", c.alias, c.reports[0].impression);
    }

    for (id, role) in [("rad-1", RaterRole::Radiologist), ("cli-1", RaterRole::Clinician)] {
        let n = simulate::run(&client, "demo", &OracleRater::new(&scenario, id, role))?;
        println!("{id} submitted {n} tasks");
    }

    let results = client.results("demo")?;
    for cohort in &results.summary.ranks {
        println!("{} ranks:", cohort.role.as_str());
        for arm in &cohort.distribution.arms {
            println!("  {:<13} {:?}", arm.arm.to_string(), arm.counts);
        }
    }
    println!("log length {}", results.last_seq);
    Ok(())
}
