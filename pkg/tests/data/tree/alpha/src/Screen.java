package alpha;

public class Screen {
    public Bitmap grab(View anchor) {
        View rootView = anchor.getRootView();
        rootView.setDrawingCacheEnabled(true);
        return Bitmap.createBitmap(rootView.getDrawingCache());
    }

    public void clear(View anchor) {
        anchor.getRootView().destroyDrawingCache();
    }
}
