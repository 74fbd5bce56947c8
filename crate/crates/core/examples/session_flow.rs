//! A subject walked through the service with every event appended to JSONL
//! files, then the whole service rebuilt from those files.

use trustlab::bot::StrategyConfig;
use trustlab::questionnaire::{AgeGroup, CertaintyAnswer, Demographics, Education, Ethnicity, Gender, Major, QuestionBank, RawAnswer, Religion};
use trustlab::session::{read_log_dir, ExperimentService, JsonlSink, ServiceConfig, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("trustlab-session-{}", std::process::id()));
    let config = ServiceConfig { slot_times: vec!["10:00".into()], seed: 42, ..ServiceConfig::default() };
    let mut svc = ExperimentService::new(config.clone(), StrategyConfig::shipped(), QuestionBank::shipped())?
        .with_sink(JsonlSink::create(&dir)?);

    svc.open_session(0)?;
    let id = svc.register(0)?;
    svc.start(&id)?;
    let mut view = svc.acknowledge_instructions(&id)?;
    while view.stage != Stage::Done {
        view = match view.stage {
            Stage::Practice | Stage::Game => {
                let p = view.pending.as_ref().expect("pending round");
                match p.role {
                    trustlab::game::Role::A => svc.submit_send(&id, 4.0)?,
                    trustlab::game::Role::B => svc.submit_return(&id, (p.max_input.0 / 3) as f64)?,
                }
            }
            Stage::TimePref => svc.submit_time_pref(&id, vec![RawAnswer::Text("Future".into()); view.time_pref.len()])?,
            Stage::Trust => svc.submit_trust(&id, vec![RawAnswer::Number(10.0); 5])?,
            Stage::Certainty => svc.submit_certainty(&id, vec![CertaintyAnswer::new(0, 60), CertaintyAnswer::new(5, 50)])?,
            Stage::Demographics => svc.submit_demographics(
                &id,
                Demographics {
                    gender: Gender::Other,
                    age: AgeGroup::From22To25,
                    ethnicity: Ethnicity::Asian,
                    education: Education::SomeCollege,
                    major: Major::Stem,
                    religion: Religion::NoPractice,
                },
            )?,
            Stage::Debrief => {
                let d = view.debrief.as_ref().expect("debrief shown");
                println!("debrief reveals arm {}", d.treatment);
                svc.acknowledge_debrief(&id, false)?
            }
            other => unreachable!("{other}"),
        };
    }
    println!("{id} finished with payoff {} after {} events", view.cumulative_payoff, svc.events().len());

    let events = read_log_dir(&dir)?;
    let restored = ExperimentService::restore(config, StrategyConfig::shipped(), QuestionBank::shipped(), &events)?;
    println!("restored from {}: flows identical = {}", dir.display(), restored.flows() == svc.flows());
    for rec in events.iter().take(6) {
        println!("  {}", serde_json::to_string(rec)?);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
