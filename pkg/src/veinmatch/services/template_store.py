"""Template database persisting enrolled identities to SQLite.

Uses SQLAlchemy's native async support with aiosqlite. Template members are
stored as VMFS payloads, so a template read back is bit-identical at 32-bit
precision to the feature files it was built from.
"""

import structlog
from sqlalchemy import select
from sqlalchemy.ext.asyncio import AsyncEngine, AsyncSession, create_async_engine
from sqlmodel import SQLModel

from veinmatch.models.evaluation import Identity, Template
from veinmatch.models.tables import TemplateMemberRecord, TemplateRecord
from veinmatch.services.feature_io import decode_features, encode_features

TEMPLATE_SCHEMA_VERSION = "template.v1"


class TemplateStore:
    """Persists templates to SQLite via SQLModel.

    Accepts an AsyncEngine via dependency injection to support both
    persistent and in-memory databases for testing.
    """

    def __init__(
        self,
        engine: AsyncEngine,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._engine = engine
        self._logger = logger or structlog.get_logger(__name__)

    async def close(self) -> None:
        """Close the database engine and release connections."""
        await self._engine.dispose()
        self._logger.debug("template_store_closed")

    async def __aenter__(self) -> "TemplateStore":
        return self

    async def __aexit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: object,
    ) -> None:
        await self.close()

    async def initialize_schema(self) -> None:
        """Create database tables if they don't exist."""
        async with self._engine.begin() as conn:
            await conn.run_sync(SQLModel.metadata.create_all)
        self._logger.info("template_store_initialized")

    async def save_template(self, template: Template) -> None:
        """Insert or replace the template for ``template.identity``.

        Args:
            template: The Template whose members are stored as VMFS payloads, in member order.
        """
        template_id = template.identity.key
        async with AsyncSession(self._engine) as session:
            await self._delete_members(session, template_id)
            existing = await session.get(TemplateRecord, template_id)
            if existing:
                existing.schema_version = TEMPLATE_SCHEMA_VERSION
                existing.template_size = template.size
            else:
                session.add(
                    TemplateRecord(
                        template_id=template_id,
                        schema_version=TEMPLATE_SCHEMA_VERSION,
                        subject_id=template.identity.subject_id,
                        hand=template.identity.hand.value,
                        template_size=template.size,
                    )
                )
            session.add_all(
                TemplateMemberRecord(
                    member_id=f"{template_id}:{index}",
                    template_id=template_id,
                    member_index=index,
                    source_id=member.source_id,
                    keypoint_count=len(member),
                    payload=encode_features(member),
                )
                for index, member in enumerate(template.members)
            )
            await session.commit()
        self._logger.debug("template_saved", template_id=template_id, template_size=template.size)

    async def get_template(self, identity: Identity) -> Template | None:
        """Retrieve the template of an identity.

        Args:
            identity: The enrolled subject and hand to look up.

        Returns:
            The Template with its members in enrollment order, or None if it was never enrolled.
        """
        async with AsyncSession(self._engine) as session:
            record = await session.get(TemplateRecord, identity.key)
            if record is None:
                return None
            statement = (
                select(TemplateMemberRecord)
                .where(TemplateMemberRecord.template_id == identity.key)
                .order_by(TemplateMemberRecord.member_index)
            )
            result = await session.execute(statement)
            members = [decode_features(m.payload, m.source_id) for m in result.scalars().all()]
        return Template(identity=identity, members=members)

    async def list_identities(self) -> list[Identity]:
        """Every enrolled identity, sorted by subject then hand."""
        async with AsyncSession(self._engine) as session:
            result = await session.execute(select(TemplateRecord))
            identities = [Identity(subject_id=r.subject_id, hand=r.hand) for r in result.scalars().all()]
        return sorted(identities, key=Identity.sort_key)

    async def _delete_members(self, session: AsyncSession, template_id: str) -> None:
        statement = select(TemplateMemberRecord).where(TemplateMemberRecord.template_id == template_id)
        result = await session.execute(statement)
        for member in result.scalars():
            await session.delete(member)
        await session.flush()


def create_async_engine_from_path(db_path: str) -> AsyncEngine:
    """Create an async SQLAlchemy engine for a database path, or ":memory:"."""
    if db_path == ":memory:":
        url = "sqlite+aiosqlite:///:memory:"
    else:
        url = f"sqlite+aiosqlite:///{db_path}"
    return create_async_engine(url)
