import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.middleware.gzip import GZipMiddleware
from starlette.responses import JSONResponse

from config.logging_config import setup_logging
from config.settings import VERSION, get_settings
from routes.heavy_traffic_routes import router as heavy_traffic_router
from routes.simulation_routes import router as simulation_router
from routes.solver_routes import router as solver_router
from services.errors import ModelValidationError, QueueSolverError

settings = get_settings()

# Initialize FastAPI app
app = FastAPI(title="Batch-Poisson semi-Markov queue solver", version=VERSION)

# Setup logging
setup_logging(settings.log_level)
logger = logging.getLogger(__name__)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins,
    allow_credentials=True,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["*"],
)

app.add_middleware(GZipMiddleware)

# Register all routers
app.include_router(solver_router, prefix="/api/solver", tags=["Solver"])
app.include_router(heavy_traffic_router, prefix="/api/heavy-traffic", tags=["Heavy traffic"])
app.include_router(simulation_router, prefix="/api/simulation", tags=["Simulation"])


@app.get("/")
async def root():
    logger.info("Root endpoint accessed")
    return {"message": "Batch-Poisson semi-Markov queue solver", "version": VERSION}


@app.exception_handler(ModelValidationError)
async def model_validation_handler(request: Request, exc: ModelValidationError):
    logger.warning(f"Invalid model at {exc.path}: {exc.message}")
    return JSONResponse(
        status_code=422,
        content={"error": "ModelValidationError", "path": exc.path, "message": exc.message},
    )


@app.exception_handler(QueueSolverError)
async def solver_error_handler(request: Request, exc: QueueSolverError):
    logger.error(f"{type(exc).__name__}: {exc}")
    return JSONResponse(status_code=409, content={"error": type(exc).__name__, "message": str(exc)})


@app.exception_handler(Exception)
async def generic_exception_handler(request: Request, exc: Exception):
    logger.error(f"Unexpected error: {str(exc)}")
    return JSONResponse(status_code=500, content={"message": "An internal error occurred. Please try again later."})
