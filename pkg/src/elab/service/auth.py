"""Research groups, their credentials, and cookie sessions.

A group is the unit of identity: students, teachers and admins all log in
as a group. Students point at the teacher group that supervises them,
which is what the logbook permissions key off.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import time
from dataclasses import dataclass

from ..storage import Database
from .errors import BadRequest, Conflict

ROLES = ("student", "teacher", "admin")

# Interactive-tier work factor. Stored credentials carry their own count,
# so raising this later only affects new registrations.
PBKDF2_ITERATIONS = 20_000


def make_credential(password: str) -> str:
    salt = secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), bytes.fromhex(salt), PBKDF2_ITERATIONS
    )
    return f"pbkdf2${PBKDF2_ITERATIONS}${salt}${digest.hex()}"


def check_credential(password: str, credential: str) -> bool:
    try:
        scheme, iterations, salt, want = credential.split("$")
        if scheme != "pbkdf2":
            return False
        got = hashlib.pbkdf2_hmac(
            "sha256", password.encode("utf-8"), bytes.fromhex(salt), int(iterations)
        ).hex()
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(got, want)


@dataclass(frozen=True)
class Group:
    group_id: str
    name: str
    school: str
    city: str
    state: str
    role: str
    teacher_id: str | None

    def wire(self) -> dict:
        return {
            "group_id": self.group_id,
            "name": self.name,
            "school": self.school,
            "city": self.city,
            "state": self.state,
            "role": self.role,
            "teacher_id": self.teacher_id,
        }


class GroupStore:
    """Registered research groups; names are unique within a school."""

    SCHEMA = """
    CREATE TABLE IF NOT EXISTS groups (
        seq INTEGER PRIMARY KEY AUTOINCREMENT,
        group_id TEXT UNIQUE NOT NULL,
        name TEXT NOT NULL,
        school TEXT NOT NULL,
        city TEXT NOT NULL,
        state TEXT NOT NULL,
        role TEXT NOT NULL,
        teacher_id TEXT,
        credential TEXT NOT NULL,
        UNIQUE (name, school)
    );
    """

    _COLS = "group_id, name, school, city, state, role, teacher_id"

    def __init__(self, db: Database):
        self.db = db
        self.db.executescript(self.SCHEMA)

    def register(
        self,
        name: str,
        school: str,
        city: str = "",
        state: str = "",
        role: str = "student",
        password: str = "",
        teacher_id: str | None = None,
    ) -> Group:
        for label, value in (("name", name), ("school", school), ("password", password)):
            if not isinstance(value, str) or not value.strip():
                raise BadRequest(f"{label} must be a nonempty string", field=label)
        if role not in ROLES:
            raise BadRequest(f"role must be one of: {', '.join(ROLES)}", field="role")
        if role == "student":
            if not teacher_id:
                raise BadRequest("students must name their teacher group", field="teacher_id")
            teacher = self.get(teacher_id)
            if teacher is None or teacher.role != "teacher":
                raise BadRequest(f"no such teacher: {teacher_id}", field="teacher_id")
        else:
            teacher_id = None
        with self.db.lock:
            if self.find(name, school) is not None:
                raise Conflict(f"group {name!r} already registered at {school!r}")
            (count,) = self.db.query("SELECT COUNT(*) FROM groups")[0]
            group_id = f"grp-{count + 1:06d}"
            self.db.execute(
                "INSERT INTO groups (group_id, name, school, city, state, role, teacher_id, credential) "
                "VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                (group_id, name, school, city, state, role, teacher_id, make_credential(password)),
            )
        group = self.get(group_id)
        assert group is not None
        return group

    def _row(self, row: tuple) -> Group:
        group_id, name, school, city, state, role, teacher_id = row
        return Group(group_id, name, school, city, state, role, teacher_id)

    def get(self, group_id: str) -> Group | None:
        rows = self.db.query(
            f"SELECT {self._COLS} FROM groups WHERE group_id = ?", (group_id,)
        )
        return self._row(rows[0]) if rows else None

    def find(self, name: str, school: str) -> Group | None:
        rows = self.db.query(
            f"SELECT {self._COLS} FROM groups WHERE name = ? AND school = ?", (name, school)
        )
        return self._row(rows[0]) if rows else None

    def authenticate(self, name: str, school: str, password: str) -> Group | None:
        rows = self.db.query(
            f"SELECT {self._COLS}, credential FROM groups WHERE name = ? AND school = ?",
            (name, school),
        )
        if not rows:
            return None
        *fields, credential = rows[0]
        if not check_credential(password, credential):
            return None
        return self._row(tuple(fields))

    def students_of(self, teacher_id: str) -> list[Group]:
        rows = self.db.query(
            f"SELECT {self._COLS} FROM groups WHERE teacher_id = ? ORDER BY seq", (teacher_id,)
        )
        return [self._row(r) for r in rows]


class SessionStore:
    """Opaque bearer tokens with idle expiry, one row per login."""

    SCHEMA = """
    CREATE TABLE IF NOT EXISTS sessions (
        token TEXT PRIMARY KEY,
        group_id TEXT NOT NULL,
        created_at REAL NOT NULL,
        last_seen REAL NOT NULL
    );
    """

    def __init__(self, db: Database, groups: GroupStore, idle_seconds: float = 8 * 3600.0):
        self.db = db
        self.groups = groups
        self.idle_seconds = idle_seconds
        self.now = time.time  # expiry tests swap this out
        self.db.executescript(self.SCHEMA)

    def open(self, group_id: str) -> str:
        token = secrets.token_hex(16)
        t = self.now()
        self.db.execute(
            "INSERT INTO sessions (token, group_id, created_at, last_seen) VALUES (?, ?, ?, ?)",
            (token, group_id, t, t),
        )
        return token

    def resolve(self, token: str) -> Group | None:
        rows = self.db.query(
            "SELECT group_id, last_seen FROM sessions WHERE token = ?", (token,)
        )
        if not rows:
            return None
        group_id, last_seen = rows[0]
        t = self.now()
        if t - last_seen > self.idle_seconds:
            self.close(token)
            return None
        self.db.execute("UPDATE sessions SET last_seen = ? WHERE token = ?", (t, token))
        return self.groups.get(group_id)

    def close(self, token: str) -> None:
        self.db.execute("DELETE FROM sessions WHERE token = ?", (token,))
