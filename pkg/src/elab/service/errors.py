"""Failures that map straight onto HTTP status codes.

Workbench operations raise these; the route layer turns them into JSON
responses. Anything else escaping a handler is a genuine bug and keeps
its 500.
"""


class ApiError(Exception):
    status = 400

    def __init__(self, message: str, **extra):
        super().__init__(message)
        self.message = message
        self.extra = extra

    def payload(self) -> dict:
        out = {"error": self.message}
        out.update(self.extra)
        return out


class BadRequest(ApiError):
    status = 400


class NotAuthenticated(ApiError):
    status = 401


class Forbidden(ApiError):
    status = 403


class NotFound(ApiError):
    status = 404


class Conflict(ApiError):
    status = 409
