//! WebSocket wire format: one JSON object per text frame, tagged by `type`.

use forage_core::view::ObserverView;
use forage_core::world::Color;
use forage_core::Action;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl From<Direction> for Action {
    fn from(d: Direction) -> Action {
        match d {
            Direction::Up => Action::Up,
            Direction::Down => Action::Down,
            Direction::Left => Action::Left,
            Direction::Right => Action::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Join {
        name: String,
    },
    Input {
        dir: Option<Direction>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
    },
    StartGame,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfInfo {
    pub id: u32,
    pub icon: String,
    pub x: i32,
    pub y: i32,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireForager {
    pub id: u32,
    pub icon: String,
    pub x: i32,
    pub y: i32,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalScore {
    pub id: u32,
    pub name: String,
    pub icon: String,
    pub score: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Joined {
        id: u32,
        icon: String,
        width: i32,
        height: i32,
    },
    GameStart {
        game: usize,
        seconds: f64,
    },
    View {
        t: f64,
        #[serde(rename = "self")]
        me: SelfInfo,
        food: Vec<[i64; 3]>,
        markers: Vec<[i32; 2]>,
        foragers: Vec<WireForager>,
        score: u64,
    },
    GameOver {
        scores: Vec<FinalScore>,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    /// Wire form of an observer view. Nothing outside the view is consulted,
    /// so hidden information cannot leak onto the wire.
    pub fn view(view: &ObserverView) -> ServerMessage {
        let me = view
            .foragers
            .iter()
            .find(|f| f.id == view.observer)
            .expect("a view always contains its observer");
        ServerMessage::View {
            t: view.t,
            me: SelfInfo {
                id: view.observer.0,
                icon: me.icon.clone(),
                x: view.position.x,
                y: view.position.y,
                color: me.color,
            },
            food: view
                .food
                .iter()
                .map(|(c, n)| [i64::from(c.x), i64::from(c.y), i64::from(*n)])
                .collect(),
            markers: view.markers.iter().map(|c| [c.x, c.y]).collect(),
            foragers: view
                .foragers
                .iter()
                .map(|f| WireForager {
                    id: f.id.0,
                    icon: f.icon.clone(),
                    x: f.position.x,
                    y: f.position.y,
                    color: f.color,
                })
                .collect(),
            score: view.score,
        }
    }

    pub fn error(message: impl Into<String>) -> ServerMessage {
        ServerMessage::Error {
            message: message.into(),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
