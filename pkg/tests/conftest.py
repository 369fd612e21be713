import json
from importlib import resources

import pytest

from revchain.plan import parse_call_expr
from revchain.registry import instance_from_json

FIXTURES = resources.files("revchain") / "assets" / "fixtures"

LUCAS_LABEL = (
    "BookFlight(flight_ID=FindFlight(destination=GetUserDestination(userName='Lucas')))"
)
MEETING_ROOM_RENDERED = (
    "BookRoom(person_ID=Name2ID(person_name='Jack'), "
    "room_ID=RecommendRoom(start_time='9:00 am', end_time='10:00 am'), "
    "start_time='9:00 am', end_time='10:00 am')"
)


def _meeting_room_raw():
    return json.loads((FIXTURES / "meeting_room.json").read_text(encoding="utf-8"))[0]


@pytest.fixture
def meeting_room_raw():
    return _meeting_room_raw()


@pytest.fixture
def meeting_room():
    return instance_from_json(_meeting_room_raw())


@pytest.fixture
def meeting_room_path():
    return str(FIXTURES / "meeting_room.json")


@pytest.fixture
def lucas_plan():
    (plan,) = parse_call_expr(LUCAS_LABEL)
    return plan


@pytest.fixture
def lucas_pool_raw():
    return [
        {
            "name": "BookFlight",
            "description": "Book a flight",
            "arguments": [{"name": "flight_ID", "description": "flight to book", "type": "Identifier"}],
            "output": {"name": "booking", "type": "String"},
        },
        {
            "name": "FindFlight",
            "description": "Find a flight to a destination",
            "arguments": [{"name": "destination", "description": "where to fly", "type": "String"}],
            "output": {"name": "flight_ID", "type": "Identifier"},
        },
        {
            "name": "GetUserDestination",
            "description": "Look up a user's destination",
            "arguments": [{"name": "userName", "description": "the user's name", "type": "String"}],
            "output": {"name": "destination", "type": "String"},
        },
    ]
