# Service, model and view unit tests
