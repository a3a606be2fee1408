"""SQLModel table definitions for the template database.

Tables stay separate from the frozen domain models: SQLModel rows are mutable
ORM objects, while Template and FeatureSet are immutable values carrying numpy
arrays. Members are stored as VMFS payloads, so a template read back from the
database is exactly what a feature file would hold.
"""

from sqlalchemy import LargeBinary
from sqlmodel import Field, SQLModel


class TemplateRecord(SQLModel, table=True):
    """One enrolled identity."""

    __tablename__ = "templates"

    template_id: str = Field(primary_key=True)
    schema_version: str
    subject_id: str = Field(index=True)
    hand: str
    template_size: int


class TemplateMemberRecord(SQLModel, table=True):
    """One enrollment sample of a template, ordered by ``member_index``."""

    __tablename__ = "template_members"

    member_id: str = Field(primary_key=True)
    template_id: str = Field(index=True, foreign_key="templates.template_id")
    member_index: int
    source_id: str
    keypoint_count: int
    payload: bytes = Field(sa_type=LargeBinary)
