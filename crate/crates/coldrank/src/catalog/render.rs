//! Tiered metadata rendering.
//!
//! Output is one `Label: value(s)` line per field in a fixed order, so the
//! same movie renders byte-identically every time. Tier V3 requires its
//! fields to be present (a missing field is a hard error naming it); the
//! extra V4 fields (cast, crew, awards) render as `none` when empty so a
//! sparse catalog still produces the full tier.

use super::{CatalogError, CreditRole, MovieRecord, Tier};

/// How many cast credits make it into the rendered text, by billing order.
const CAST_LIMIT: usize = 5;

/// Render a movie's metadata at the given tier.
pub fn render_metadata(movie: &MovieRecord, tier: Tier) -> Result<String, CatalogError> {
    let mut lines: Vec<String> = Vec::new();

    if matches!(tier, Tier::V1 | Tier::V3 | Tier::V4) {
        lines.push(format!("Genre: {}", required_list(movie, "genres", &movie.genres, tier)?));
    }
    if matches!(tier, Tier::V2 | Tier::V3 | Tier::V4) {
        lines.push(format!(
            "Synopsis: {}",
            required_text(movie, "synopsis", &movie.synopsis, tier)?
        ));
    }
    if matches!(tier, Tier::V3 | Tier::V4) {
        lines.push(format!(
            "Content rating: {}",
            required_text(movie, "content_rating", &movie.content_rating, tier)?
        ));
        lines.push(format!(
            "Character types: {}",
            required_list(movie, "character_types", &movie.character_types, tier)?
        ));
        lines.push(format!("Mood: {}", required_list(movie, "mood", &movie.mood, tier)?));
        lines.push(format!("Era: {}", required_text(movie, "era", &movie.era, tier)?));
    }
    if tier == Tier::V4 {
        lines.push(format!("Cast: {}", render_cast(movie)));
        lines.push(format!("Crew: {}", render_crew(movie)));
        lines.push(format!("Awards: {}", render_optional_list(&movie.awards)));
    }

    Ok(lines.join("\n"))
}

fn required_text<'a>(
    movie: &MovieRecord,
    field: &'static str,
    value: &'a str,
    tier: Tier,
) -> Result<&'a str, CatalogError> {
    if value.trim().is_empty() {
        return Err(CatalogError::MissingField {
            movie_id: movie.movie_id.clone(),
            field,
            tier,
        });
    }
    Ok(value)
}

fn required_list(
    movie: &MovieRecord,
    field: &'static str,
    values: &[String],
    tier: Tier,
) -> Result<String, CatalogError> {
    if values.is_empty() {
        return Err(CatalogError::MissingField {
            movie_id: movie.movie_id.clone(),
            field,
            tier,
        });
    }
    Ok(values.join(", "))
}

fn render_optional_list(values: &[String]) -> String {
    if values.is_empty() {
        "none".to_string()
    } else {
        values.join(", ")
    }
}

/// Top-5 cast by billing order, each with their award count.
fn render_cast(movie: &MovieRecord) -> String {
    let mut cast: Vec<_> = movie
        .cast
        .iter()
        .filter(|credit| credit.role == CreditRole::Cast)
        .collect();
    if cast.is_empty() {
        return "none".to_string();
    }
    cast.sort_by_key(|credit| credit.billing_order);
    cast.iter()
        .take(CAST_LIMIT)
        .map(|credit| {
            let noun = if credit.award_count == 1 { "award" } else { "awards" };
            format!("{} ({} {})", credit.name, credit.award_count, noun)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn render_crew(movie: &MovieRecord) -> String {
    if movie.crew.is_empty() {
        return "none".to_string();
    }
    let mut crew: Vec<_> = movie.crew.iter().collect();
    crew.sort_by_key(|credit| credit.billing_order);
    crew.iter()
        .map(|credit| format!("{} ({})", credit.name, credit.role))
        .collect::<Vec<_>>()
        .join(", ")
}
