package beta;

class Db {
    Cursor users(SQLiteDatabase db) {
        return db.rawQuery("SELECT * FROM users", null);
    }

    void close(SQLiteDatabase db) {
        db.close();
    }

    int count(Cursor c) {
        return c.getCount();
    }
}
